"""Minimal strings between the static charges and string-probability observables.

A minimal string is a Manhattan-shortest (hence monotone) link path
connecting the two static corners.  Plaquette flips preserve path length,
so the monotone family is closed under them; the order k of a string is
its distance from the initial string in the single-plaquette-flip graph.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .configspace import SectorBasis
from .lattice import LatticeGeometry, X, Y


@dataclass(frozen=True)
class StringPath:
    """Connected monotone link path between the static charges."""

    links: tuple[int, ...]  # in traversal order from the even charge

    @property
    def length(self) -> int:
        return len(self.links)

    @property
    def link_set(self) -> frozenset[int]:
        return frozenset(self.links)

    def mask(self) -> int:
        m = 0
        for q in self.links:
            m |= 1 << q
        return m


@dataclass(frozen=True)
class StringOrderMap:
    """Plaquette-flip distance from the initial string, per minimal string."""

    strings: tuple[StringPath, ...]
    orders: tuple[int, ...]
    initial: StringPath

    def order_of(self, path: StringPath) -> int:
        return self.orders[self.strings.index(path)]

    @property
    def max_order(self) -> int:
        return max(self.orders)

    def by_order(self) -> dict[int, list[StringPath]]:
        out: dict[int, list[StringPath]] = {}
        for s, k in zip(self.strings, self.orders):
            out.setdefault(k, []).append(s)
        return out

    def to_json(self) -> str:
        return json.dumps(
            [{"links": list(s.links), "k": k} for s, k in zip(self.strings, self.orders)],
            indent=2,
        )


def enumerate_minimal_strings(geom: LatticeGeometry) -> list[StringPath]:
    """All monotone link paths from static_even to static_odd.

    Canonical order: lexicographic in the step sequence (x before y).
    """
    (ax, ay), (bx, by) = geom.static_even, geom.static_odd
    sx = 1 if bx >= ax else -1
    sy = 1 if by >= ay else -1
    out: list[StringPath] = []

    def walk(cur, links):
        cx, cy = cur
        if (cx, cy) == (bx, by):
            out.append(StringPath(links=tuple(links)))
            return
        if cx != bx:
            site = (cx, cy) if sx > 0 else (cx - 1, cy)
            walk((cx + sx, cy), links + [geom.link_index(site, X)])
        if cy != by:
            site = (cx, cy) if sy > 0 else (cx, cy - 1)
            walk((cx, cy + sy), links + [geom.link_index(site, Y)])

    walk((ax, ay), [])
    return out


def classify_orders(
    geom: LatticeGeometry,
    strings: list[StringPath],
    initial: StringPath,
) -> StringOrderMap:
    """Breadth-first distances in the graph whose edges connect minimal
    strings differing by exactly the four links of one plaquette."""
    index = {s.link_set: i for i, s in enumerate(strings)}
    if initial.link_set not in index:
        raise ValueError("initial string is not in the minimal-string family")
    plaq_sets = [frozenset(p.links) for p in geom.plaquettes]
    orders = [-1] * len(strings)
    start = index[initial.link_set]
    orders[start] = 0
    queue = [start]
    while queue:
        nxt = []
        for i in queue:
            s = strings[i].link_set
            for pl in plaq_sets:
                t = s.symmetric_difference(pl)
                j = index.get(t)
                if j is not None and orders[j] < 0:
                    orders[j] = orders[i] + 1
                    nxt.append(j)
        queue = nxt
    if any(k < 0 for k in orders):
        unreached = [s.links for s, k in zip(strings, orders) if k < 0]
        raise RuntimeError(f"flip graph is disconnected; unreachable strings: {unreached}")
    return StringOrderMap(strings=tuple(strings), orders=tuple(orders), initial=initial)


# ---------------------------------------------------------------------------
# Probabilities
# ---------------------------------------------------------------------------

def string_probability_local(
    psi: np.ndarray, sector: SectorBasis, path: StringPath | list[int]
) -> float:
    """Weight of all sector states whose path links are all spin down,
    irrespective of the remaining qubits (local projector)."""
    links = path.links if isinstance(path, StringPath) else tuple(path)
    mask = np.uint64(0)
    for q in links:
        mask |= np.uint64(1 << q)
    sel = (sector.states & mask) == mask
    return float(np.sum(np.abs(psi[sel]) ** 2))


def string_probability_global(
    psi: np.ndarray, sector: SectorBasis, path: StringPath | list[int]
) -> float:
    """Squared amplitude of the bare string-on-vacuum configuration
    (no matter, flux exactly on the path)."""
    links = path.links if isinstance(path, StringPath) else tuple(path)
    bits = 0
    for q in links:
        bits |= 1 << q
    try:
        i = sector.index_of(bits)
    except KeyError:
        warnings.warn(f"string-on-vacuum configuration 0x{bits:x} is outside the sector")
        return 0.0
    return float(np.abs(psi[i]) ** 2)


def string_populations(
    psi: np.ndarray, sector: SectorBasis, order_map: StringOrderMap
) -> dict[str, float]:
    """P_init, P_other and the per-order populations P_k (local projectors)."""
    out: dict[str, float] = {}
    p_init = string_probability_local(psi, sector, order_map.initial)
    out["P_init"] = p_init
    p_other = 0.0
    per_k: dict[int, float] = {}
    for s, k in zip(order_map.strings, order_map.orders):
        p = string_probability_local(psi, sector, s)
        if k > 0:
            p_other += p
            per_k[k] = per_k.get(k, 0.0) + p
    out["P_other"] = p_other
    for k in sorted(per_k):
        out[f"P_k{k}"] = per_k[k]
    return out
