"""Sector-restricted sparse operators for the quantum link Hamiltonian.

H = -kappa * sum_links s_{j,mu} (pair term) + m * sum_sites n_exc
    - g * sum_links S^z + J * sum_plaquettes (U + U^dagger)

All amplitudes are real, so operators are stored as real CSR matrices;
they act on complex state vectors without copies.  The mass term drops
the additive constant of the staggered form: energy is measured from the
matter vacuum, which makes string-segment bookkeeping (l*g/2 vs 2m) read
directly off diagonal entries.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .configspace import Move, SectorBasis, all_moves
from .lattice import LatticeGeometry

TERMS = ("hopping", "mass", "efield", "plaquette")


class ClosureError(RuntimeError):
    """A move maps a sector member outside the sector."""


@dataclass(frozen=True)
class CouplingParameters:
    """Couplings of the four Hamiltonian terms; kappa sets the time unit."""

    kappa: float = 1.0
    mass: float = 0.0
    efield: float = 0.0
    plaq: float = 0.0

    def as_dict(self) -> dict:
        return {"kappa": self.kappa, "mass": self.mass, "efield": self.efield, "plaq": self.plaq}


@dataclass(frozen=True)
class SparseOperator:
    """A sector-restricted operator in CSR layout."""

    matrix: sp.csr_matrix
    hermitian: bool
    label: str = ""

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def __matmul__(self, vec):
        return self.matrix @ vec

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self.matrix @ psi)))

    def dump(self) -> dict:
        """Fingerprint for cross-implementation regression."""
        m = self.matrix.sorted_indices()
        h = hashlib.blake2b(digest_size=8)
        h.update(m.indptr.astype("<i8").tobytes())
        h.update(m.indices.astype("<i8").tobytes())
        h.update(np.round(m.data, 12).astype("<f8").tobytes())
        return {"dim": self.dim, "nnz": self.nnz, "hermitian": self.hermitian,
                "label": self.label, "checksum": h.hexdigest()}

    def dump_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True)


def _matter_mask(geom: LatticeGeometry) -> int:
    return (1 << geom.n_sites) - 1


def _link_mask(geom: LatticeGeometry) -> int:
    return ((1 << geom.qubit_count) - 1) ^ _matter_mask(geom)


def hopping_amplitude(geom: LatticeGeometry, move: Move) -> float:
    """-kappa * s_{j,e_mu} at unit kappa; the link-raising orientation is
    tied to the even-to-odd direction, and any globally consistent gauge
    gives identical observables."""
    j, mu = move.key
    return -float(geom.staggering(j, mu))


def _offdiag_term(geom, sector, moves, unit_amp, coupling, label):
    rows, cols, data = [], [], []
    states = sector.states
    for mv in moves:
        mask = np.uint64(mv.mask)
        flip = np.uint64(mv.flip)
        amp = coupling * unit_amp(mv)
        for val in (np.uint64(mv.val_a), np.uint64(mv.val_b)):
            sel = np.nonzero((states & mask) == val)[0]
            if sel.size == 0:
                continue
            targets = states[sel] ^ flip
            col = sector.lookup_many(targets)
            missing = np.nonzero(col < 0)[0]
            if missing.size:
                bad = int(states[sel[missing[0]]])
                raise ClosureError(
                    f"{mv.kind} move {mv.key} maps sector member 0x{bad:x} "
                    f"to 0x{int(targets[missing[0]]):x}, which is outside the sector"
                )
            rows.append(sel)
            cols.append(col)
            data.append(np.full(sel.size, amp))
    if rows:
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(sector.dim, sector.dim),
        ).tocsr()
    else:
        mat = sp.csr_matrix((sector.dim, sector.dim))
    mat.sort_indices()
    return SparseOperator(matrix=mat, hermitian=True, label=label)


def diagonal_mass(geom: LatticeGeometry, states: np.ndarray, mass: float) -> np.ndarray:
    """m * (number of matter excitations); vacuum pinned at zero."""
    occ = np.bitwise_count(states & np.uint64(_matter_mask(geom)))
    return mass * occ.astype(np.float64)


def diagonal_efield(geom: LatticeGeometry, states: np.ndarray, g: float) -> np.ndarray:
    """-g * sum_links S^z with S^z = +1/2 for bit 0 and -1/2 for bit 1."""
    down = np.bitwise_count(states & np.uint64(_link_mask(geom)))
    sz_sum = 0.5 * geom.n_links - down.astype(np.float64)
    return -g * sz_sum


def build_term(
    geom: LatticeGeometry,
    sector: SectorBasis,
    term: str,
    params: CouplingParameters,
) -> SparseOperator:
    """One of the four Hamiltonian terms restricted to the sector."""
    if term == "mass":
        diag = diagonal_mass(geom, sector.states, params.mass)
        return SparseOperator(sp.diags(diag, format="csr"), hermitian=True, label="mass")
    if term == "efield":
        diag = diagonal_efield(geom, sector.states, params.efield)
        return SparseOperator(sp.diags(diag, format="csr"), hermitian=True, label="efield")
    if term == "hopping":
        moves = all_moves(geom, families=("hopping",))
        return _offdiag_term(
            geom, sector, moves, lambda mv: hopping_amplitude(geom, mv), params.kappa, "hopping"
        )
    if term == "plaquette":
        moves = all_moves(geom, families=("plaquette",))
        # U + U^dagger enters with +J on both matrix elements
        return _offdiag_term(geom, sector, moves, lambda mv: 1.0, params.plaq, "plaquette")
    raise ValueError(f"unknown term {term!r}; expected one of {TERMS}")


def build_hamiltonian(
    geom: LatticeGeometry,
    sector: SectorBasis,
    params: CouplingParameters,
) -> SparseOperator:
    """Sum of the four terms; terms with zero coupling are skipped, so a
    J = 0 Hamiltonian never touches plaquette moves (whose targets may
    fall outside a hopping-only sector)."""
    total = sp.csr_matrix((sector.dim, sector.dim))
    couplings = {"hopping": params.kappa, "mass": params.mass,
                 "efield": params.efield, "plaquette": params.plaq}
    for term, c in couplings.items():
        if c != 0.0:
            total = total + build_term(geom, sector, term, params).matrix
    total.sort_indices()
    return SparseOperator(matrix=total, hermitian=True, label="hamiltonian")


def gauss_table(geom: LatticeGeometry, states: np.ndarray) -> np.ndarray:
    """Per-site Gauss eigenvalues for every state: shape (n_sites, dim).

    Returned as float64 multiples of 1/2; vectorized twin of
    :func:`qlmsim.configspace.gauss_residuals`.
    """
    dim = states.size
    out = np.zeros((geom.n_sites, dim))
    one = np.uint64(1)
    for j in geom.sites():
        site_idx = geom.matter_index(j)
        rho_sign = 1.0 if geom.parity(j) == 0 else -1.0
        bit = ((states >> np.uint64(site_idx)) & one).astype(np.float64)
        g = rho_sign * bit
        jx, jy = j
        out_links = []
        in_links = []
        from .lattice import X, Y  # local import to avoid cycle at module load

        for mu in (X, Y):
            if geom.has_link(j, mu):
                out_links.append(geom.link_index(j, mu))
        if jx > 0:
            in_links.append(geom.link_index((jx - 1, jy), X))
        if jy > 0:
            in_links.append(geom.link_index((jx, jy - 1), Y))
        for q in out_links:
            lb = ((states >> np.uint64(q)) & one).astype(np.float64)
            g -= 0.5 - lb
        for q in in_links:
            lb = ((states >> np.uint64(q)) & one).astype(np.float64)
            g += 0.5 - lb
        out[site_idx] = g
    return out


def build_gauss_generator(geom: LatticeGeometry, sector: SectorBasis, site) -> SparseOperator:
    """G_j as a diagonal sector operator (it acts diagonally on the basis)."""
    table = gauss_table(geom, sector.states)
    diag = table[geom.matter_index(tuple(site))]
    return SparseOperator(sp.diags(diag, format="csr"), hermitian=True, label=f"gauss{tuple(site)}")


def resonance_order(params: CouplingParameters, rel_tol: float = 1e-9) -> int | None:
    """The odd integer l with 2m = l*g, if the couplings sit on resonance.

    Returns None off resonance and when g = 0 (no string tension, so no
    segment-length bookkeeping applies).
    """
    if params.efield == 0:
        return None
    ell = 2.0 * params.mass / params.efield
    k = round(ell)
    if k <= 0 or k % 2 == 0:
        return None
    if abs(ell - k) > rel_tol * max(1.0, abs(ell)):
        return None
    return int(k)


def confinement_margin(params: CouplingParameters) -> float:
    """(2m + g) / kappa; well inside the confined regime when >> 1."""
    if params.kappa <= 0:
        raise ValueError("kappa must be positive to measure the confinement margin")
    return (2.0 * params.mass + params.efield) / params.kappa
