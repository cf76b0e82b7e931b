"""Independent reference implementations used only by the test suite.

These deliberately re-derive the physics from scratch (plain Python
integers, dictionaries and explicit loops) so they share no code path
with the vectorized package internals they are used to check.
"""

from __future__ import annotations

import numpy as np


def site_index(lx, ly, jx, jy):
    return jy * lx + jx


def xlink_index(lx, ly, jx, jy):
    return lx * ly + jy * (lx - 1) + jx


def ylink_index(lx, ly, jx, jy):
    return lx * ly + (lx - 1) * ly + jy * lx + jx


def hopping_rules(lx, ly):
    """(flip_mask, pattern_a, pattern_b) for the pair term on every link.

    Pair creation needs empty matter on both ends and link bit 1 when the
    lower endpoint has even parity, bit 0 when odd; all three bits flip.
    """
    rules = []
    for jy in range(ly):
        for jx in range(lx - 1):
            a = site_index(lx, ly, jx, jy)
            b = site_index(lx, ly, jx + 1, jy)
            l = xlink_index(lx, ly, jx, jy)
            flip = (1 << a) | (1 << b) | (1 << l)
            l0 = 1 if (jx + jy) % 2 == 0 else 0
            pat = l0 << l
            rules.append((flip, pat, pat ^ flip))
    for jy in range(ly - 1):
        for jx in range(lx):
            a = site_index(lx, ly, jx, jy)
            b = site_index(lx, ly, jx, jy + 1)
            l = ylink_index(lx, ly, jx, jy)
            flip = (1 << a) | (1 << b) | (1 << l)
            l0 = 1 if (jx + jy) % 2 == 0 else 0
            pat = l0 << l
            rules.append((flip, pat, pat ^ flip))
    return rules


def plaquette_rules(lx, ly):
    rules = []
    for py in range(ly - 1):
        for px in range(lx - 1):
            bottom = xlink_index(lx, ly, px, py)
            right = ylink_index(lx, ly, px + 1, py)
            top = xlink_index(lx, ly, px, py + 1)
            left = ylink_index(lx, ly, px, py)
            flip = (1 << bottom) | (1 << right) | (1 << top) | (1 << left)
            pat = (1 << bottom) | (1 << right)
            rules.append((flip, pat, pat ^ flip))
    return rules


def bfs_closure(lx, ly, seed_bits, families=("hopping", "plaquette")):
    """Hash-set breadth-first closure; returns a sorted list of states."""
    rules = []
    if "hopping" in families:
        rules += hopping_rules(lx, ly)
    if "plaquette" in families:
        rules += plaquette_rules(lx, ly)
    seen = {seed_bits}
    frontier = [seed_bits]
    while frontier:
        nxt = []
        for s in frontier:
            for flip, pa, pb in rules:
                probe = s & flip
                if probe == pa or probe == pb:
                    t = s ^ flip
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
        frontier = nxt
    return sorted(seen)


def hamiltonian_by_application(lx, ly, states, kappa, mass, efield, plaq):
    """Dict-of-dicts matrix built by applying each term to basis states."""
    n_sites = lx * ly
    n_links = (lx - 1) * ly + lx * (ly - 1)
    idx = {s: i for i, s in enumerate(states)}
    mat: dict[tuple[int, int], float] = {}

    def add(i, j, v):
        mat[(i, j)] = mat.get((i, j), 0.0) + v

    for i, s in enumerate(states):
        occ = bin(s & ((1 << n_sites) - 1)).count("1")
        add(i, i, mass * occ)
        down = bin(s >> n_sites).count("1")
        add(i, i, -efield * (0.5 * n_links - down))
    if kappa != 0.0:
        for jy in range(ly):
            for jx in range(lx - 1):
                _hop_apply(mat, idx, states, lx, ly, jx, jy, "x", kappa)
        for jy in range(ly - 1):
            for jx in range(lx):
                _hop_apply(mat, idx, states, lx, ly, jx, jy, "y", kappa)
    if plaq != 0.0:
        for flip, pa, pb in plaquette_rules(lx, ly):
            for i, s in enumerate(states):
                probe = s & flip
                if probe == pa or probe == pb:
                    add(i, idx[s ^ flip], plaq)
    return mat


def _hop_apply(mat, idx, states, lx, ly, jx, jy, mu, kappa):
    if mu == "x":
        a = site_index(lx, ly, jx, jy)
        b = site_index(lx, ly, jx + 1, jy)
        l = xlink_index(lx, ly, jx, jy)
        sign = 1.0
    else:
        a = site_index(lx, ly, jx, jy)
        b = site_index(lx, ly, jx, jy + 1)
        l = ylink_index(lx, ly, jx, jy)
        sign = -1.0 if jx % 2 else 1.0
    flip = (1 << a) | (1 << b) | (1 << l)
    l0 = 1 if (jx + jy) % 2 == 0 else 0
    pa = l0 << l
    pb = pa ^ flip
    amp = -kappa * sign
    for i, s in enumerate(states):
        probe = s & flip
        if probe == pa or probe == pb:
            j = idx.get(s ^ flip)
            assert j is not None, "closure violation in oracle"
            mat[(i, j)] = mat.get((i, j), 0.0) + amp


def monotone_paths_graph_dfs(lx, ly, start, goal):
    """Path enumeration by graph DFS with shrinking Manhattan distance."""
    paths = []

    def dist(a):
        return abs(a[0] - goal[0]) + abs(a[1] - goal[1])

    def step(cur, links):
        if cur == goal:
            paths.append(tuple(sorted(links)))
            return
        cx, cy = cur
        for nxt in ((cx + 1, cy), (cx - 1, cy), (cx, cy + 1), (cx, cy - 1)):
            if not (0 <= nxt[0] < lx and 0 <= nxt[1] < ly):
                continue
            if dist(nxt) != dist(cur) - 1:
                continue
            if nxt[0] != cx:
                link = xlink_index(lx, ly, min(cx, nxt[0]), cy)
            else:
                link = ylink_index(lx, ly, cx, min(cy, nxt[1]))
            step(nxt, links + [link])

    step(start, [])
    return sorted(set(paths))


def dense_from_dict(mat, dim):
    H = np.zeros((dim, dim))
    for (i, j), v in mat.items():
        H[i, j] += v
    return H
