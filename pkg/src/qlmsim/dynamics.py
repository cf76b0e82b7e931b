"""Time evolution: sector-exact Krylov propagation and structured Trotter steps.

The Krylov engine is the continuous-time oracle: exp(-iHt) psi via Lanczos
with adaptive sub-stepping against an a-posteriori residual target per
unit time.  The Trotter engine applies, per step, four entangling
sublayers of mutually commuting hopping/plaquette terms (each term
exponentiated exactly on its two connected configurations), then the
diagonal electric-field phases, then the diagonal mass phases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .configspace import Move, SectorBasis, all_moves
from .hamiltonian import (
    CouplingParameters,
    SparseOperator,
    diagonal_efield,
    diagonal_mass,
    hopping_amplitude,
)
from .lattice import LatticeGeometry, X, Y

N_SUBLAYERS = 4


class ScheduleError(RuntimeError):
    """The disjoint-support colouring needs more than four sublayers."""


class KrylovError(RuntimeError):
    """Krylov propagation failed to reach the requested tolerance."""


@dataclass(frozen=True)
class SublayerSchedule:
    """Exact 4-cover of the entangling terms with disjoint supports.

    ``sublayers[k]`` lists moves whose qubit supports are pairwise
    disjoint, so their exponentials commute exactly and may be applied
    in any order (or in parallel) within the sublayer.
    """

    sublayers: tuple[tuple[Move, ...], ...]

    def all_terms(self):
        for layer in self.sublayers:
            yield from layer


def _sublayer_of(mv: Move) -> int:
    """Closed-form parity colouring.

    Hopping terms: x-links split by jx parity (colours 0/1), y-links by
    jy parity (2/3).  A plaquette's x-links carry jx = px and its y-links
    jy = py, so anchor parities (px, py) = (odd, odd) -> 0, (even, even)
    -> 1, (even, odd) -> 2, (odd, even) -> 3 avoid every same-colour
    hopping link; same-class plaquettes are never adjacent (anchors
    differ by even offsets).  Plain first-fit greedy can paint itself
    into a corner on these lattices, so the rule is fixed instead.
    """
    if mv.kind == "hopping":
        (jx, jy), mu = mv.key
        if mu == X:
            return jx % 2
        return 2 + jy % 2
    px, py = mv.key
    return {(1, 1): 0, (0, 0): 1, (0, 1): 2, (1, 0): 3}[(px % 2, py % 2)]


def schedule_sublayers(geom: LatticeGeometry) -> SublayerSchedule:
    """Deterministic 4-colouring of all entangling terms under the
    disjoint-qubit-support conflict relation, validated on construction."""
    layers: list[list[Move]] = [[] for _ in range(N_SUBLAYERS)]
    supports: list[set[int]] = [set() for _ in range(N_SUBLAYERS)]
    for mv in all_moves(geom):
        k = _sublayer_of(mv)
        qs = set(mv.qubits)
        clash = supports[k] & qs
        if clash:
            clique = [m.key for m in layers[k] if set(m.qubits) & qs]
            raise ScheduleError(
                f"term {mv.kind}{mv.key} conflicts inside sublayer {k}: {clique}"
            )
        layers[k].append(mv)
        supports[k] |= qs
    return SublayerSchedule(sublayers=tuple(tuple(l) for l in layers))


# ---------------------------------------------------------------------------
# Trotter engine
# ---------------------------------------------------------------------------

@dataclass
class _TermKernel:
    move: Move
    amplitude: float  # coupling included
    idx_a: np.ndarray  # rows matching val_a
    idx_b: np.ndarray  # their partners (val_b side)


class TrotterEngine:
    """Precomputed index pairs for one (geometry, sector, params) triple.

    Per step: exact per-term exponentials sublayer by sublayer, then the
    electric-field phase, then the mass phase.  Terms whose coupling is
    zero are dropped, so a J = 0 engine never touches plaquette pairs.
    """

    def __init__(
        self,
        geom: LatticeGeometry,
        sector: SectorBasis,
        params: CouplingParameters,
        schedule: SublayerSchedule | None = None,
    ):
        self.geom = geom
        self.sector = sector
        self.params = params
        self.schedule = schedule if schedule is not None else schedule_sublayers(geom)
        self.sublayer_kernels: list[list[_TermKernel]] = []
        states = sector.states
        for layer in self.schedule.sublayers:
            kernels = []
            for mv in layer:
                amp = self._coupling(mv)
                if amp == 0.0:
                    continue
                sel = np.nonzero((states & np.uint64(mv.mask)) == np.uint64(mv.val_a))[0]
                partners = sector.lookup_many(states[sel] ^ np.uint64(mv.flip))
                if np.any(partners < 0):
                    bad = int(states[sel[np.argmax(partners < 0)]])
                    raise ValueError(
                        f"sector not closed under {mv.kind}{mv.key}: "
                        f"member 0x{bad:x} has no partner"
                    )
                kernels.append(_TermKernel(mv, amp, sel, partners))
            self.sublayer_kernels.append(kernels)
        self.efield_diag = diagonal_efield(geom, states, params.efield)
        self.mass_diag = diagonal_mass(geom, states, params.mass)

    def _coupling(self, mv: Move) -> float:
        if mv.kind == "hopping":
            return self.params.kappa * hopping_amplitude(self.geom, mv)
        return self.params.plaq

    def step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """One first-order step of size dt (new array; input untouched)."""
        psi = psi.astype(np.complex128, copy=True)
        for kernels in self.sublayer_kernels:
            for k in kernels:
                phi = k.amplitude * dt
                c, s = np.cos(phi), np.sin(phi)
                a = psi[k.idx_a]
                b = psi[k.idx_b]
                psi[k.idx_a] = c * a - 1j * s * b
                psi[k.idx_b] = c * b - 1j * s * a
            # disjoint supports: order inside the layer is immaterial
        psi *= np.exp(-1j * dt * self.efield_diag)
        psi *= np.exp(-1j * dt * self.mass_diag)
        return psi


def trotter_step(
    schedule: SublayerSchedule,
    sector: SectorBasis,
    params: CouplingParameters,
    dt: float,
    psi: np.ndarray,
    geom: LatticeGeometry,
) -> np.ndarray:
    """One-shot convenience wrapper; builds the kernel each call.

    Long runs should hold a :class:`TrotterEngine` instead.
    """
    return TrotterEngine(geom, sector, params, schedule).step(psi, dt)


# ---------------------------------------------------------------------------
# Krylov engine
# ---------------------------------------------------------------------------

def _lanczos_attempt(matvec, psi, h, tol_abs, max_dim):
    """Try exp(-i h H) psi in one Krylov space; None when not converged.

    Error control: classic a-posteriori estimate beta_m * |last
    component| of the propagated small-system vector, checked at h and
    h/2 to guard against fortuitous zeros.
    """
    beta0 = np.linalg.norm(psi)
    V = [psi / beta0]
    alphas: list[float] = []
    betas: list[float] = []
    for m in range(1, max_dim + 1):
        w = matvec(V[-1])
        a = float(np.real(np.vdot(V[-1], w)))
        w = w - a * V[-1]
        if len(V) > 1:
            w = w - betas[-1] * V[-2]
        # full reorthogonalization keeps the residual estimate honest
        for v in V:
            w -= np.vdot(v, w) * v
        alphas.append(a)
        b = float(np.linalg.norm(w))
        T = np.zeros((m, m))
        T[np.arange(m), np.arange(m)] = alphas
        if m > 1:
            off = np.array(betas)
            T[np.arange(m - 1), np.arange(1, m)] = off
            T[np.arange(1, m), np.arange(m - 1)] = off
        evals, evecs = np.linalg.eigh(T)
        e1 = evecs[0, :]
        y = evecs @ (np.exp(-1j * h * evals) * e1)
        y_half = evecs @ (np.exp(-1j * 0.5 * h * evals) * e1)
        err = h * b * max(abs(y[-1]), abs(y_half[-1]))
        if b < 1e-14 or err < tol_abs:
            out = np.zeros_like(psi)
            for coeff, v in zip(y, V):
                out += coeff * v
            return beta0 * out
        if m == max_dim:
            return None
        betas.append(b)
        V.append(w / b)
    return None


def evolve_krylov(
    H: SparseOperator | "np.ndarray",
    psi0: np.ndarray,
    t: float,
    tol: float = 1e-10,
    max_dim: int = 64,
) -> np.ndarray:
    """psi(t) = exp(-i H t) psi0 with residual below tol per unit time.

    Sub-steps adaptively (halving on residual failure); the result is
    renormalized after checking the norm drift stayed below 1e-10.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    mat = H.matrix if isinstance(H, SparseOperator) else H
    matvec = lambda v: mat @ v
    psi = psi0.astype(np.complex128, copy=True)
    if t == 0.0:
        return psi
    remaining = float(t)
    h = remaining
    while remaining > 1e-15 * t:
        h = min(h, remaining)
        out = _lanczos_attempt(matvec, psi, h, tol * h, max_dim)
        if out is None:
            h *= 0.5
            if h < 1e-12 * t:
                raise KrylovError(
                    f"no convergence at max_dim={max_dim}: substep underflow "
                    f"(remaining t={remaining:.3e}, tol={tol})"
                )
            continue
        psi = out
        remaining -= h
        h *= 1.4  # gentle regrowth after successes
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-10:
        raise KrylovError(f"norm drift {drift:.3e} exceeds 1e-10 before renormalization")
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryRecord:
    step: int
    t: float
    norm: float
    energy: float
    observables: dict[str, float] = field(default_factory=dict)


def run_trajectory(
    *,
    engine: str,
    psi0: np.ndarray,
    hamiltonian: SparseOperator | None = None,
    trotter: TrotterEngine | None = None,
    dt: float | None = None,
    n_steps: int | None = None,
    times: np.ndarray | None = None,
    observers: dict | None = None,
    krylov_tol: float = 1e-10,
) -> list[TrajectoryRecord]:
    """Deterministic observable series along one evolution.

    ``observers`` maps column names to callables psi -> float.  The
    Trotter engine records after every step at multiples of dt; the
    Krylov engine records on the supplied time grid.  Norm and energy
    diagnostics are always included (energy needs ``hamiltonian``).
    """
    observers = observers or {}

    def record(step, t, psi):
        norm = float(np.linalg.norm(psi))
        energy = hamiltonian.expectation(psi) if hamiltonian is not None else float("nan")
        return TrajectoryRecord(
            step=step, t=t, norm=norm, energy=energy,
            observables={name: float(fn(psi)) for name, fn in observers.items()},
        )

    out = [record(0, 0.0, psi0)]
    if engine == "trotter":
        if trotter is None or dt is None or n_steps is None:
            raise ValueError("trotter engine needs trotter=, dt= and n_steps=")
        psi = psi0
        for k in range(1, n_steps + 1):
            psi = trotter.step(psi, dt)
            out.append(record(k, k * dt, psi))
        return out
    if engine == "krylov":
        if hamiltonian is None or times is None:
            raise ValueError("krylov engine needs hamiltonian= and times=")
        psi = psi0
        t_prev = 0.0
        for k, t in enumerate(times, start=1):
            if t < t_prev:
                raise ValueError("times must be nondecreasing")
            psi = evolve_krylov(hamiltonian, psi, t - t_prev, tol=krylov_tol)
            t_prev = t
            out.append(record(k, float(t), psi))
        return out
    raise ValueError(f"unknown engine {engine!r}")


def basis_state(sector: SectorBasis, config_bits: int) -> np.ndarray:
    """Unit vector on one basis configuration."""
    psi = np.zeros(sector.dim, dtype=np.complex128)
    psi[sector.index_of(config_bits)] = 1.0
    return psi
