"""Bit-packed basis configurations and the dynamically connected sector.

A basis configuration packs one bit per qubit (matter block, x-link block,
y-link block, see :mod:`qlmsim.lattice`) into a single unsigned 64-bit
integer.  Matter bit 1 means a charge excitation is present; link bit 0 is
spin up (S^z = +1/2), link bit 1 is spin down (S^z = -1/2).

The particle-hole convention ties excitations to bosonic occupation:
bit 1 on an even site is a positron (occupation 1), bit 1 on an odd site
is an electron (occupation 0).  Under this convention the hopping term
creates/annihilates excitation pairs while flipping the link in between,
the all-zero matter state is dynamical, and the Gauss generator
G_j = rho_j - div(S^z)_j with rho_j = (-1)^(jx+jy) * matter_bit is
conserved by every Hamiltonian term.

The physical sector is enumerated by breadth-first closure of a seed
configuration under the off-diagonal moves (hopping and plaquette); the
Gauss charges of the seed label the sector and are conserved exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticeGeometry, Coord, X, Y

SECTOR_MAGIC = b"QLMSEC1\x00"
MOVE_FLAG_BITS = {"hopping": 1, "plaquette": 2}
DEFAULT_SECTOR_CAP = 50_000_000


class SectorCapExceeded(RuntimeError):
    """BFS grew past the configured sector-size cap."""


class SectorFileError(ValueError):
    """Malformed, truncated or mismatched sector file."""


@dataclass(frozen=True)
class Configuration:
    """A packed basis state with an explicit register width."""

    bits: int
    width: int

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.width):
            raise ValueError(f"bits 0x{self.bits:x} do not fit in width {self.width}")

    def bit(self, pos: int) -> int:
        return (self.bits >> pos) & 1

    def flip(self, *positions: int) -> "Configuration":
        mask = 0
        for p in positions:
            mask |= 1 << p
        return Configuration(self.bits ^ mask, self.width)

    def to_bitstring(self) -> str:
        """Qubit 0 first (little-endian register order)."""
        return format(self.bits, f"0{self.width}b")[::-1]


@dataclass(frozen=True)
class GaussCharges:
    """Per-site eigenvalues of the Gauss generator on a reference state.

    Values are multiples of 1/2; on open boundaries missing links simply
    contribute nothing, so edge sites may carry half-integer residuals.
    """

    values: tuple[float, ...]

    def __eq__(self, other):
        return isinstance(other, GaussCharges) and self.values == other.values


@dataclass(frozen=True)
class Move:
    """One off-diagonal operator: acts on configurations matching either
    of two complementary patterns by flipping all bits in ``flip``."""

    kind: str  # "hopping" | "plaquette"
    key: tuple  # ((jx, jy), mu) for hopping, (px, py) for plaquette
    qubits: tuple[int, ...]
    mask: int
    val_a: int  # pattern annihilated by one orientation, created by the other
    val_b: int
    flip: int

    def apply(self, bits: int) -> int | None:
        probe = bits & self.mask
        if probe == self.val_a or probe == self.val_b:
            return bits ^ self.flip
        return None


def hopping_move(geom: LatticeGeometry, j: Coord, mu: str) -> Move:
    """Pair creation/annihilation across the link (j, j+e_mu).

    Pattern bookkeeping: both matter bits and the link bit flip together.
    Pair creation from empty matter requires link bit 1 when the lower
    endpoint j is even and link bit 0 when it is odd; this is the unique
    assignment conserving the Gauss charges.
    """
    a = geom.matter_index(j)
    link = geom.link_index(j, mu)
    j2 = (j[0] + 1, j[1]) if mu == X else (j[0], j[1] + 1)
    b = geom.matter_index(j2)
    flip = (1 << a) | (1 << link) | (1 << b)
    l0 = 1 if geom.parity(j) == 0 else 0
    val_a = l0 << link  # matter bits 0 on both sides
    return Move(
        kind="hopping",
        key=(j, mu),
        qubits=(a, link, b),
        mask=flip,
        val_a=val_a,
        val_b=val_a ^ flip,
        flip=flip,
    )


def plaquette_move(geom: LatticeGeometry, index: int) -> Move:
    """Ring exchange on plaquette ``index``: U_box + U_box^dagger.

    U_box raises bottom and right (requires bits 1) and lowers top and
    left (requires bits 0); the conjugate acts on the complement.
    """
    p = geom.plaquettes[index]
    flip = sum(1 << q for q in p.links)
    val_a = (1 << p.bottom) | (1 << p.right)
    return Move(
        kind="plaquette",
        key=p.anchor,
        qubits=p.links,
        mask=flip,
        val_a=val_a,
        val_b=val_a ^ flip,
        flip=flip,
    )


def all_moves(geom: LatticeGeometry, families=("hopping", "plaquette")) -> list[Move]:
    """All enabled moves in deterministic (qubit-layout) order."""
    moves: list[Move] = []
    if "hopping" in families:
        for j, mu in geom.links():
            moves.append(hopping_move(geom, j, mu))
    if "plaquette" in families:
        for i in range(len(geom.plaquettes)):
            moves.append(plaquette_move(geom, i))
    return moves


def apply_move(geom: LatticeGeometry, config: Configuration, move: Move) -> Configuration | None:
    """Apply one move; None when the operator annihilates the state."""
    if config.width != geom.qubit_count:
        raise ValueError("configuration width does not match geometry")
    out = move.apply(config.bits)
    return None if out is None else Configuration(out, config.width)


# ---------------------------------------------------------------------------
# Gauss law
# ---------------------------------------------------------------------------

def gauss_residuals(geom: LatticeGeometry, config: Configuration) -> GaussCharges:
    """Evaluate G_j = rho_j - div(S^z)_j on every site.

    rho_j = (-1)^(jx+jy) * matter_bit(j); div is outgoing minus incoming
    S^z over existing links (missing boundary links contribute 0).
    """
    if config.width != geom.qubit_count:
        raise ValueError("configuration width does not match geometry")
    bits = config.bits

    def sz(link_qubit: int) -> float:
        return 0.5 - ((bits >> link_qubit) & 1)

    values = []
    for j in geom.sites():
        rho = (1 if geom.parity(j) == 0 else -1) * ((bits >> geom.matter_index(j)) & 1)
        div = 0.0
        for mu in (X, Y):
            if geom.has_link(j, mu):
                div += sz(geom.link_index(j, mu))
        jx, jy = j
        if jx > 0:
            div -= sz(geom.link_index((jx - 1, jy), X))
        if jy > 0:
            div -= sz(geom.link_index((jx, jy - 1), Y))
        values.append(rho - div)
    return GaussCharges(values=tuple(values))


# ---------------------------------------------------------------------------
# Initial string state
# ---------------------------------------------------------------------------

def diagonal_string_path(geom: LatticeGeometry) -> list[int]:
    """Staircase of links from static_even to static_odd, alternating x/y.

    Steps in +-x and +-y directions are interleaved as evenly as possible,
    starting with the direction that has more remaining steps (x on ties),
    which reproduces the usual diagonal string on lx x ly lattices.
    """
    (ax, ay), (bx, by) = geom.static_even, geom.static_odd
    dx, dy = bx - ax, by - ay
    sx, sy = (1 if dx > 0 else -1), (1 if dy > 0 else -1)
    nx, ny = abs(dx), abs(dy)
    path = []
    cur = (ax, ay)
    last = Y if nx >= ny else X  # so the first step goes along the longer axis
    while nx or ny:
        step_x = nx > 0 and (ny == 0 or last != X)
        if step_x:
            site = cur if sx > 0 else (cur[0] - 1, cur[1])
            path.append(geom.link_index(site, X))
            cur = (cur[0] + sx, cur[1])
            nx -= 1
            last = X
        else:
            site = cur if sy > 0 else (cur[0], cur[1] - 1)
            path.append(geom.link_index(site, Y))
            cur = (cur[0], cur[1] + sy)
            ny -= 1
            last = Y
    return path


def _validate_path(geom: LatticeGeometry, path: list[int]) -> None:
    if len(path) != len(set(path)):
        raise ValueError("path repeats a link")
    degree: dict[Coord, int] = {}
    edges = []
    for q in path:
        a, b, _ = geom.link_endpoints(q)
        degree[a] = degree.get(a, 0) + 1
        degree[b] = degree.get(b, 0) + 1
        edges.append((a, b))
    ends = sorted(j for j, d in degree.items() if d == 1)
    statics = sorted([geom.static_even, geom.static_odd])
    if ends != statics or any(d > 2 for d in degree.values()):
        raise ValueError(f"path endpoints {ends} do not match static sites {statics}")
    # connectivity: walk from one static end
    adj: dict[Coord, list[Coord]] = {}
    for a, b in edges:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = {statics[0]}
    stack = [statics[0]]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != len(degree):
        raise ValueError("path is disconnected")


def initial_string_state(geom: LatticeGeometry, path: list[int] | str = "diagonal") -> tuple[Configuration, GaussCharges]:
    """Product state: no matter, spin-down flux exactly on the path links.

    ``path`` is a list of link qubit indices forming a connected chain
    between the two static corners, or the literal ``"diagonal"``.
    """
    if isinstance(path, str):
        if path != "diagonal":
            raise ValueError(f"unknown path spec {path!r}")
        path = diagonal_string_path(geom)
    _validate_path(geom, path)
    bits = 0
    for q in path:
        bits |= 1 << q
    config = Configuration(bits, geom.qubit_count)
    return config, gauss_residuals(geom, config)


# ---------------------------------------------------------------------------
# Sector enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SectorBasis:
    """Ordered basis of the dynamically connected sector.

    ``states`` is strictly ascending; ordinals are positions in this
    array.  Immutable and shareable across workers.
    """

    states: np.ndarray  # uint64, sorted ascending
    width: int
    seed: int | None
    moves: frozenset[str]
    geometry_hash: int
    _lookup_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return int(self.states.size)

    def index_of(self, config: int | Configuration) -> int:
        bits = config.bits if isinstance(config, Configuration) else int(config)
        i = int(np.searchsorted(self.states, np.uint64(bits)))
        if i >= self.dim or int(self.states[i]) != bits:
            raise KeyError(f"configuration 0x{bits:x} not in sector")
        return i

    def __contains__(self, config) -> bool:
        try:
            self.index_of(config)
            return True
        except KeyError:
            return False

    def lookup_many(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized index lookup; -1 where absent."""
        pos = np.searchsorted(self.states, bits)
        pos_c = np.minimum(pos, self.dim - 1)
        ok = self.states[pos_c] == bits
        return np.where(ok, pos_c, -1).astype(np.int64)


def _move_tables(moves: list[Move]):
    """Pattern tables for vectorized application: two rows per move."""
    masks, vals, flips = [], [], []
    for m in moves:
        for v in (m.val_a, m.val_b):
            masks.append(m.mask)
            vals.append(v)
            flips.append(m.flip)
    return (
        np.array(masks, dtype=np.uint64),
        np.array(vals, dtype=np.uint64),
        np.array(flips, dtype=np.uint64),
    )


def _setdiff_sorted(cand: np.ndarray, have: np.ndarray) -> np.ndarray:
    """cand (sorted unique) minus have (sorted unique)."""
    if have.size == 0:
        return cand
    pos = np.searchsorted(have, cand)
    pos_c = np.minimum(pos, have.size - 1)
    present = have[pos_c] == cand
    return cand[~present]


def enumerate_sector(
    geom: LatticeGeometry,
    seed: Configuration,
    moves: frozenset[str] | tuple | list = frozenset({"hopping", "plaquette"}),
    cap: int = DEFAULT_SECTOR_CAP,
) -> SectorBasis:
    """Breadth-first closure of ``seed`` under the enabled move families.

    The result is independent of traversal details: states are kept as a
    sorted, deduplicated array and ordinals derive from packed-value
    order.  Aborts with :class:`SectorCapExceeded` past ``cap`` states.
    """
    if geom.qubit_count > 64:
        raise NotImplementedError("packed configurations support at most 64 qubits")
    if seed.width != geom.qubit_count:
        raise ValueError("seed width does not match geometry")
    families = frozenset(moves)
    unknown = families - set(MOVE_FLAG_BITS)
    if unknown:
        raise ValueError(f"unknown move families: {sorted(unknown)}")

    move_list = all_moves(geom, families=sorted(families))
    visited = np.array([seed.bits], dtype=np.uint64)
    if not move_list:
        return SectorBasis(
            states=visited, width=seed.width, seed=seed.bits,
            moves=families, geometry_hash=geom.geometry_hash(),
        )
    masks, vals, flips = _move_tables(move_list)
    frontier = visited
    while frontier.size:
        outs = []
        for mask, val, flip in zip(masks, vals, flips):
            hit = frontier[(frontier & mask) == val]
            if hit.size:
                outs.append(hit ^ flip)
        if not outs:
            break
        cand = np.unique(np.concatenate(outs))
        new = _setdiff_sorted(cand, visited)
        if new.size == 0:
            break
        visited = np.sort(np.concatenate([visited, new]))
        if visited.size > cap:
            raise SectorCapExceeded(
                f"sector exceeded cap of {cap} states "
                f"({visited.size} reached, frontier {new.size})"
            )
        frontier = new
    return SectorBasis(
        states=visited, width=seed.width, seed=seed.bits,
        moves=families, geometry_hash=geom.geometry_hash(),
    )


# ---------------------------------------------------------------------------
# Sector files
# ---------------------------------------------------------------------------

def save_sector(basis: SectorBasis, path) -> None:
    """Write header {magic, geometry hash, move flags, count} + sorted records."""
    flags = 0
    for fam in basis.moves:
        flags |= MOVE_FLAG_BITS[fam]
    with open(path, "wb") as fh:
        fh.write(SECTOR_MAGIC)
        fh.write(struct.pack("<QQQ", basis.geometry_hash, flags, basis.dim))
        fh.write(basis.states.astype("<u8").tobytes())


def load_sector(path, geom: LatticeGeometry | None = None) -> SectorBasis:
    """Read a sector file; verifies magic, geometry hash and record count.

    The seed is not part of the on-disk format (it is always one of the
    records and is carried by the run configuration), so the loaded basis
    has ``seed=None``.
    """
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SECTOR_MAGIC:
            raise SectorFileError(f"bad magic {magic!r}; not a sector file or wrong version")
        header = fh.read(24)
        if len(header) != 24:
            raise SectorFileError("truncated header")
        ghash, flags, count = struct.unpack("<QQQ", header)
        payload = fh.read()
    if geom is not None and ghash != geom.geometry_hash():
        raise SectorFileError(
            f"geometry hash mismatch: file 0x{ghash:016x}, geometry 0x{geom.geometry_hash():016x}"
        )
    if len(payload) != 8 * count:
        raise SectorFileError(f"expected {8 * count} record bytes, found {len(payload)}")
    states = np.frombuffer(payload, dtype="<u8").astype(np.uint64)
    if states.size > 1 and not np.all(states[1:] > states[:-1]):
        raise SectorFileError("records are not strictly sorted")
    families = frozenset(f for f, bit in MOVE_FLAG_BITS.items() if flags & bit)
    width = geom.qubit_count if geom is not None else 64
    return SectorBasis(states=states, width=width, seed=None,
                       moves=families, geometry_hash=ghash)
