import numpy as np
import pytest

from qlmsim import Configuration, build_lattice, enumerate_sector, initial_string_state
from qlmsim.configspace import all_moves, plaquette_move
from qlmsim.hamiltonian import CouplingParameters, build_hamiltonian, gauss_table
from qlmsim.dynamics import (
    KrylovError,
    TrotterEngine,
    basis_state,
    evolve_krylov,
    run_trajectory,
    schedule_sublayers,
    trotter_step,
)


def dense_expm_state(H, psi, t):
    w, V = np.linalg.eigh(H.matrix.toarray())
    return V @ (np.exp(-1j * w * t) * (V.conj().T @ psi))


# ---------------------------------------------------------------------------
# Scheduling
# ---------------------------------------------------------------------------

def test_schedule_exact_cover_54(geom54):
    s = schedule_sublayers(geom54)
    moves = [m for layer in s.sublayers for m in layer]
    assert len(moves) == 31 + 12
    assert len({m.key for m in moves}) == 43
    assert sum(1 for l in s.sublayers if l) == 4


def test_schedule_disjoint_support():
    for lx, ly in [(2, 2), (2, 3), (4, 3), (5, 4), (6, 5)]:
        g = build_lattice(lx, ly)
        for layer in schedule_sublayers(g).sublayers:
            used = set()
            for m in layer:
                assert not (used & set(m.qubits))
                used |= set(m.qubits)


def test_schedule_22_plaquette_isolated(geom22):
    s = schedule_sublayers(geom22)
    for layer in s.sublayers:
        kinds = [m.kind for m in layer]
        if "plaquette" in kinds:
            assert kinds == ["plaquette"]  # shares qubits with every hopping term


def test_schedule_numerical_commutation_23(geom23):
    """Same-sublayer terms commute exactly as dense sector operators."""
    seed, _ = initial_string_state(geom23, "diagonal")
    basis = enumerate_sector(geom23, seed)
    params = CouplingParameters(kappa=1.0, mass=0.0, efield=0.0, plaq=1.0)
    states = basis.states

    def term_matrix(mv):
        A = np.zeros((basis.dim, basis.dim))
        for val in (np.uint64(mv.val_a), np.uint64(mv.val_b)):
            sel = np.nonzero((states & np.uint64(mv.mask)) == val)[0]
            cols = basis.lookup_many(states[sel] ^ np.uint64(mv.flip))
            A[sel, cols] = 1.0
        return A

    for layer in schedule_sublayers(geom23).sublayers:
        mats = [term_matrix(m) for m in layer]
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                comm = mats[i] @ mats[j] - mats[j] @ mats[i]
                assert np.abs(comm).max() == 0.0


# ---------------------------------------------------------------------------
# Krylov
# ---------------------------------------------------------------------------

def test_krylov_t_zero(geom22):
    seed, _ = initial_string_state(geom22, "diagonal")
    basis = enumerate_sector(geom22, seed)
    H = build_hamiltonian(geom22, basis, CouplingParameters(kappa=1, mass=1, efield=1, plaq=1))
    psi0 = basis_state(basis, seed.bits)
    out = evolve_krylov(H, psi0, 0.0)
    assert np.array_equal(out, psi0)


def test_krylov_diagonal_phases(geom43, sector43):
    params = CouplingParameters(kappa=0, mass=2.0, efield=3.0, plaq=0)
    H = build_hamiltonian(geom43, sector43, params)
    rng = np.random.default_rng(7)
    psi0 = rng.normal(size=sector43.dim) + 1j * rng.normal(size=sector43.dim)
    psi0 /= np.linalg.norm(psi0)
    t = 0.83
    out = evolve_krylov(H, psi0, t)
    exact = np.exp(-1j * H.matrix.diagonal() * t) * psi0
    assert np.abs(out - exact).max() < 1e-10


def test_krylov_vs_dense_22(geom22):
    seed, _ = initial_string_state(geom22, "diagonal")
    basis = enumerate_sector(geom22, seed)
    H = build_hamiltonian(geom22, basis, CouplingParameters(kappa=1, mass=0.7, efield=1.3, plaq=0.9))
    psi0 = basis_state(basis, seed.bits)
    for t in (0.3, 1.7, 4.0):
        out = evolve_krylov(H, psi0, t)
        exact = dense_expm_state(H, psi0, t)
        assert np.abs(out - exact).max() < 1e-10


def test_krylov_unitarity_and_energy(geom43, sector43, resonant_params):
    H = build_hamiltonian(geom43, sector43, resonant_params)
    psi = basis_state(sector43, int(sector43.seed))
    e0 = H.expectation(psi)
    for _ in range(5):
        psi = evolve_krylov(H, psi, 0.2)
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    assert abs(H.expectation(psi) - e0) < 1e-8


def test_krylov_max_dim_failure(geom43, sector43, resonant_params):
    H = build_hamiltonian(geom43, sector43, resonant_params)
    psi = basis_state(sector43, int(sector43.seed))
    with pytest.raises(KrylovError):
        evolve_krylov(H, psi, 5.0, tol=1e-14, max_dim=2)


# ---------------------------------------------------------------------------
# Trotter
# ---------------------------------------------------------------------------

def test_trotter_dt_zero(geom43, sector43, resonant_params):
    eng = TrotterEngine(geom43, sector43, resonant_params)
    psi = basis_state(sector43, int(sector43.seed))
    out = eng.step(psi, 0.0)
    assert np.abs(out - psi).max() == 0.0


def test_trotter_single_plaquette_rabi(geom22):
    mv = plaquette_move(geom22, 0)
    c0 = Configuration(mv.val_a, geom22.qubit_count)
    basis = enumerate_sector(geom22, c0, moves={"plaquette"})
    J = 1.5
    eng = TrotterEngine(geom22, basis, CouplingParameters(kappa=0, mass=0, efield=0, plaq=J))
    psi = basis_state(basis, c0.bits)
    dt, n = 0.03, 40
    for _ in range(n):
        psi = eng.step(psi, dt)
    t = dt * n
    p_flip = abs(psi[basis.index_of(c0.bits ^ mv.flip)]) ** 2
    assert p_flip == pytest.approx(np.sin(J * t) ** 2, abs=1e-12)


def test_trotter_first_order_scaling(geom43, sector43):
    params = CouplingParameters(kappa=1, mass=3, efield=6, plaq=0)
    H = build_hamiltonian(geom43, sector43, params)
    psi0 = basis_state(sector43, int(sector43.seed))
    ref = evolve_krylov(H, psi0, 0.5)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        eng = TrotterEngine(geom43, sector43, params)
        psi = psi0
        for _ in range(round(0.5 / dt)):
            psi = eng.step(psi, dt)
        errs.append(np.linalg.norm(psi - ref))
    for a, b in zip(errs, errs[1:]):
        assert 1.6 <= a / b <= 2.4  # halving within +-20%


def test_trotter_unitarity_and_gauss(geom43, sector43, resonant_params, rng):
    eng = TrotterEngine(geom43, sector43, resonant_params)
    table = gauss_table(geom43, sector43.states)
    psi = basis_state(sector43, int(sector43.seed))
    g0 = table @ np.abs(psi) ** 2
    for _ in range(20):
        psi = eng.step(psi, 0.1)
        assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    gt = table @ np.abs(psi) ** 2
    assert np.abs(gt - g0).max() < 1e-10


def test_trotter_sublayer_permutation_invariance(geom43, sector43, resonant_params, rng):
    psi0 = rng.normal(size=sector43.dim) + 1j * rng.normal(size=sector43.dim)
    psi0 /= np.linalg.norm(psi0)
    eng = TrotterEngine(geom43, sector43, resonant_params)
    out1 = eng.step(psi0, 0.17)
    eng2 = TrotterEngine(geom43, sector43, resonant_params)
    for kernels in eng2.sublayer_kernels:
        kernels.reverse()
    out2 = eng2.step(psi0, 0.17)
    assert np.abs(out1 - out2).max() < 1e-12


def test_trotter_wrapper_matches_engine(geom43, sector43, resonant_params):
    sched = schedule_sublayers(geom43)
    psi0 = basis_state(sector43, int(sector43.seed))
    a = trotter_step(sched, sector43, resonant_params, 0.1, psi0, geom43)
    b = TrotterEngine(geom43, sector43, resonant_params, sched).step(psi0, 0.1)
    assert np.array_equal(a, b)


def test_trotter_j0_stays_in_hopping_sector(geom43):
    seed, _ = initial_string_state(geom43, "diagonal")
    hop_basis = enumerate_sector(geom43, seed, moves={"hopping"})
    params = CouplingParameters(kappa=1, mass=3, efield=6, plaq=0)
    eng = TrotterEngine(geom43, hop_basis, params)
    psi = basis_state(hop_basis, seed.bits)
    for _ in range(10):
        psi = eng.step(psi, 0.1)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12  # structurally confined


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_run_trajectory_trotter(geom43, sector43, resonant_params):
    H = build_hamiltonian(geom43, sector43, resonant_params)
    eng = TrotterEngine(geom43, sector43, resonant_params)
    psi0 = basis_state(sector43, int(sector43.seed))
    i_seed = sector43.index_of(int(sector43.seed))
    recs = run_trajectory(
        engine="trotter", psi0=psi0, trotter=eng, dt=0.1, n_steps=5,
        hamiltonian=H, observers={"p_seed": lambda p: abs(p[i_seed]) ** 2},
    )
    assert len(recs) == 6
    assert recs[0].observables["p_seed"] == 1.0
    assert recs[0].t == 0.0 and recs[-1].step == 5
    for r in recs:
        assert abs(r.norm - 1.0) < 1e-12


def test_run_trajectory_krylov_energy_constant(geom43, sector43, resonant_params):
    H = build_hamiltonian(geom43, sector43, resonant_params)
    psi0 = basis_state(sector43, int(sector43.seed))
    recs = run_trajectory(
        engine="krylov", psi0=psi0, hamiltonian=H, times=np.linspace(0.1, 1.0, 10),
    )
    energies = [r.energy for r in recs]
    assert max(abs(e - energies[0]) for e in energies) < 1e-8
