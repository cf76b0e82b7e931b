"""Open-boundary square lattice geometry for the U(1) quantum link model.

Matter sites live on the vertices of an ``lx x ly`` grid (0-based
coordinates, ``x`` runs over columns, ``y`` over rows).  Spin-1/2 gauge
fields live on the links between nearest neighbours; with open boundaries
an x-link at ``(jx, jy)`` exists only for ``jx < lx - 1`` and a y-link only
for ``jy < ly - 1``.

Qubit layout is fixed once and for all: matter block first, then the
x-link block, then the y-link block, each row-major.  Every bit position
in a packed basis configuration refers to this layout, so it must never
change between runs (persisted sector files depend on it).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

Coord = tuple[int, int]

X, Y = "x", "y"


@dataclass(frozen=True)
class Plaquette:
    """Four links of an elementary square anchored at its lower-left site.

    Link indices are ordered (bottom, right, top, left); bottom/top are
    x-links, right/left are y-links.
    """

    anchor: Coord
    bottom: int
    right: int
    top: int
    left: int

    @property
    def links(self) -> tuple[int, int, int, int]:
        return (self.bottom, self.right, self.top, self.left)


@dataclass(frozen=True)
class LatticeGeometry:
    """Immutable site/link/plaquette indexing of an open-boundary lattice.

    Safe to share between threads or workers; all methods are read-only.
    """

    lx: int
    ly: int
    static_even: Coord
    static_odd: Coord
    plaquettes: tuple[Plaquette, ...] = field(init=False)

    def __post_init__(self):
        if self.lx < 2 or self.ly < 2:
            raise ValueError(f"lattice extents must be >= 2, got {self.lx}x{self.ly}")
        corners = {(0, 0), (self.lx - 1, 0), (0, self.ly - 1), (self.lx - 1, self.ly - 1)}
        for name, site in (("static_even", self.static_even), ("static_odd", self.static_odd)):
            if site not in corners:
                raise ValueError(f"{name}={site} is not a corner of the {self.lx}x{self.ly} lattice")
        if self.static_even == self.static_odd:
            raise ValueError("static charges must sit on distinct corners")
        if self.parity(self.static_even) != 0:
            raise ValueError(f"static_even={self.static_even} has odd parity")
        if self.parity(self.static_odd) != 1:
            raise ValueError(f"static_odd={self.static_odd} has even parity")
        plaqs = []
        for py in range(self.ly - 1):
            for px in range(self.lx - 1):
                plaqs.append(
                    Plaquette(
                        anchor=(px, py),
                        bottom=self.link_index((px, py), X),
                        right=self.link_index((px + 1, py), Y),
                        top=self.link_index((px, py + 1), X),
                        left=self.link_index((px, py), Y),
                    )
                )
        object.__setattr__(self, "plaquettes", tuple(plaqs))

    # ----- block sizes -----
    @property
    def n_sites(self) -> int:
        return self.lx * self.ly

    @property
    def n_xlinks(self) -> int:
        return (self.lx - 1) * self.ly

    @property
    def n_ylinks(self) -> int:
        return self.lx * (self.ly - 1)

    @property
    def n_links(self) -> int:
        return self.n_xlinks + self.n_ylinks

    @property
    def qubit_count(self) -> int:
        return self.n_sites + self.n_links

    # ----- index maps -----
    def site_in_bounds(self, j: Coord) -> bool:
        return 0 <= j[0] < self.lx and 0 <= j[1] < self.ly

    def matter_index(self, j: Coord) -> int:
        if not self.site_in_bounds(j):
            raise ValueError(f"site {j} outside {self.lx}x{self.ly} lattice")
        return j[1] * self.lx + j[0]

    def has_link(self, j: Coord, mu: str) -> bool:
        if not self.site_in_bounds(j):
            return False
        if mu == X:
            return j[0] < self.lx - 1
        if mu == Y:
            return j[1] < self.ly - 1
        raise ValueError(f"direction must be 'x' or 'y', got {mu!r}")

    def link_index(self, j: Coord, mu: str) -> int:
        """Qubit index of the link from site j in direction mu."""
        if not self.has_link(j, mu):
            raise ValueError(f"no {mu}-link at {j} (open boundaries)")
        if mu == X:
            return self.n_sites + j[1] * (self.lx - 1) + j[0]
        return self.n_sites + self.n_xlinks + j[1] * self.lx + j[0]

    def link_endpoints(self, qubit: int) -> tuple[Coord, Coord, str]:
        """Inverse of link_index: (site, site + e_mu, mu) for a link qubit."""
        if not self.n_sites <= qubit < self.qubit_count:
            raise ValueError(f"qubit {qubit} is not a link qubit")
        k = qubit - self.n_sites
        if k < self.n_xlinks:
            jy, jx = divmod(k, self.lx - 1)
            return (jx, jy), (jx + 1, jy), X
        k -= self.n_xlinks
        jy, jx = divmod(k, self.lx)
        return (jx, jy), (jx, jy + 1), Y

    def sites(self):
        for jy in range(self.ly):
            for jx in range(self.lx):
                yield (jx, jy)

    def links(self):
        """All links as (site, mu) pairs in qubit-index order."""
        for jy in range(self.ly):
            for jx in range(self.lx - 1):
                yield (jx, jy), X
        for jy in range(self.ly - 1):
            for jx in range(self.lx):
                yield (jx, jy), Y

    def incident_links(self, j: Coord) -> list[int]:
        """Qubit indices of all existing links touching site j."""
        out = []
        jx, jy = j
        if self.has_link(j, X):
            out.append(self.link_index(j, X))
        if self.has_link(j, Y):
            out.append(self.link_index(j, Y))
        if jx > 0:
            out.append(self.link_index((jx - 1, jy), X))
        if jy > 0:
            out.append(self.link_index((jx, jy - 1), Y))
        return out

    # ----- staggering -----
    @staticmethod
    def parity(j: Coord) -> int:
        return (j[0] + j[1]) % 2

    def staggering(self, j: Coord, mu: str | None = None) -> int:
        """Staggering sign: s_{j,ex} = +1, s_{j,ey} = (-1)^jx, s_j = (-1)^(jx+jy)."""
        if not self.site_in_bounds(j):
            raise ValueError(f"site {j} outside lattice")
        if mu is None:
            return -1 if self.parity(j) else 1
        if mu == X:
            return 1
        if mu == Y:
            return -1 if j[0] % 2 else 1
        raise ValueError(f"direction must be 'x', 'y' or None, got {mu!r}")

    # ----- export / identity -----
    def as_dict(self) -> dict:
        """JSON-friendly summary: extents, index maps and plaquette table."""
        return {
            "lx": self.lx,
            "ly": self.ly,
            "static_even": list(self.static_even),
            "static_odd": list(self.static_odd),
            "qubit_count": self.qubit_count,
            "matter_index": {f"{jx},{jy}": self.matter_index((jx, jy)) for jx, jy in self.sites()},
            "link_index": {f"{j[0]},{j[1]},{mu}": self.link_index(j, mu) for j, mu in self.links()},
            "plaquettes": [
                {"anchor": list(p.anchor), "links": list(p.links)} for p in self.plaquettes
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def geometry_hash(self) -> int:
        """Stable 64-bit fingerprint of the geometry, used in sector files."""
        key = json.dumps(
            [self.lx, self.ly, list(self.static_even), list(self.static_odd)],
            separators=(",", ":"),
        ).encode()
        return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def build_lattice(lx: int, ly: int, static_even: Coord = (0, 0), static_odd: Coord | None = None) -> LatticeGeometry:
    """Build the geometry with static charges on two corners.

    By default the odd static charge goes to the corner opposite
    ``static_even`` when that corner has odd parity (true whenever
    lx + ly is odd, as for 5x4 and 4x3); otherwise an adjacent corner
    of odd parity is chosen.
    """
    if static_odd is None:
        if lx % 2 == 1 and ly % 2 == 1:
            raise ValueError(
                f"a {lx}x{ly} lattice has no odd-parity corner; "
                "at least one extent must be even"
            )
        sx, sy = static_even
        opposite = (lx - 1 - sx, ly - 1 - sy)
        if (opposite[0] + opposite[1]) % 2 == 1:
            static_odd = opposite
        else:
            candidates = [(lx - 1 - sx, sy), (sx, ly - 1 - sy)]
            static_odd = next(c for c in candidates if (c[0] + c[1]) % 2 == 1)
    return LatticeGeometry(lx=lx, ly=ly, static_even=tuple(static_even), static_odd=tuple(static_odd))
