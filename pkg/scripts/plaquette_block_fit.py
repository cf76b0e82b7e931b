"""Fit a structured depth-7 family for the plaquette block.

Hypothesis (from inspecting unconstrained solutions): the exact unitary
exp(-i theta (|1100><0011| + h.c.)) factors as

    U(theta) = C1 . [R(a1,b1)(0,2) || R(a2,b2)(1,3)] . C2
                  . [R(a3,b3)(0,2) || R(a4,b4)(1,3)] . C3

with constant two-gate layers C1, C2, C3 on pairs (0,1) and (2,3), and
XY-class rotations R(a,b) = exp(-i theta (a XX + b YY)).  Joint fit over
a theta grid; exactness at the grid plus analyticity in theta gives
exactness everywhere (verified on random thetas).

On success writes frozen constants to src/qlmsim/_plaquette_block.npz.
"""

import numpy as np
import jax
import jax.numpy as jnp
from jax.scipy.linalg import expm

jax.config.update("jax_enable_x64", True)

N, DIM = 4, 16
CONST_PAIRS = ((0, 1), (2, 3))
ROT_PAIRS = ((0, 2), (1, 3))

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
XX = np.kron(SX, SX)
YY = np.kron(SY, SY)

PAULI2 = []
for p in [np.eye(2, dtype=complex), SX, SY, np.diag([1.0, -1.0]).astype(complex)]:
    for q in [np.eye(2, dtype=complex), SX, SY, np.diag([1.0, -1.0]).astype(complex)]:
        PAULI2.append(np.kron(p, q))
PAULI2 = np.stack(PAULI2)


def target_unitary(theta):
    a, b = 0b0011, 0b1100
    U = np.eye(DIM, dtype=complex)
    U[a, a] = U[b, b] = np.cos(theta)
    U[a, b] = U[b, a] = -1j * np.sin(theta)
    return U


def make_apply(pair):
    q0, q1 = pair
    perm_in = np.zeros(DIM, dtype=int)
    for i in range(DIM):
        b0, b1 = (i >> q0) & 1, (i >> q1) & 1
        rbits = [(i >> q) & 1 for q in range(N) if q not in (q0, q1)]
        r = rbits[0] | (rbits[1] << 1)
        perm_in[(b0 + 2 * b1) * 4 + r] = i
    inv = np.argsort(perm_in)

    def apply(gate4, U):
        M = U[perm_in, :].reshape(4, 4, DIM)
        M = jnp.einsum("ab,bri->ari", gate4, M).reshape(DIM, DIM)
        return M[inv, :]

    return apply


A01, A23 = make_apply(CONST_PAIRS[0]), make_apply(CONST_PAIRS[1])
A02, A13 = make_apply(ROT_PAIRS[0]), make_apply(ROT_PAIRS[1])
XXj, YYj, P2j = jnp.array(XX), jnp.array(YY), jnp.array(PAULI2)


def const_gate(p16):
    H = jnp.einsum("k,kij->ij", p16, P2j)
    return expm(-1j * H)


def rot(a, b, theta):
    return expm(-1j * theta * (a * XXj + b * YYj))


def ansatz(consts, slopes, theta):
    # consts: (6,16)  three layers x two gates; slopes: (4,2)
    U = jnp.eye(DIM, dtype=complex)
    U = A01(const_gate(consts[0]), U)
    U = A23(const_gate(consts[1]), U)
    U = A02(rot(slopes[0, 0], slopes[0, 1], theta), U)
    U = A13(rot(slopes[1, 0], slopes[1, 1], theta), U)
    U = A01(const_gate(consts[2]), U)
    U = A23(const_gate(consts[3]), U)
    U = A02(rot(slopes[2, 0], slopes[2, 1], theta), U)
    U = A13(rot(slopes[3, 0], slopes[3, 1], theta), U)
    U = A01(const_gate(consts[4]), U)
    U = A23(const_gate(consts[5]), U)
    return U


THETAS = np.array([0.11, 0.23, 0.37, 0.52, 0.71, 0.93, 1.18, 1.49])
TARGETS = jnp.array([target_unitary(t) for t in THETAS])
_ansatz_v = jax.vmap(ansatz, in_axes=(None, None, 0))


def loss_fn(consts, slopes):
    U = _ansatz_v(consts, slopes, jnp.array(THETAS))
    overlaps = jnp.abs(jnp.einsum("tij,tij->t", TARGETS.conj(), U)) / DIM
    return jnp.mean(1.0 - overlaps)


loss_jit = jax.jit(loss_fn)
grad_jit = jax.jit(jax.grad(loss_fn, argnums=(0, 1)))


def optimize(seed, iters=12000):
    rng = np.random.default_rng(seed)
    consts = jnp.array(rng.normal(scale=0.4, size=(6, 16)))
    slopes = jnp.array(rng.normal(scale=0.4, size=(4, 2)))
    x = [consts, slopes]
    ms = [jnp.zeros_like(v) for v in x]
    vs = [jnp.zeros_like(v) for v in x]
    lr, b1, b2, eps = 0.02, 0.9, 0.999, 1e-9
    for t in range(1, iters + 1):
        gs = grad_jit(*x)
        for i in range(2):
            ms[i] = b1 * ms[i] + (1 - b1) * gs[i]
            vs[i] = b2 * vs[i] + (1 - b2) * gs[i] * gs[i]
            x[i] = x[i] - lr * (ms[i] / (1 - b1**t)) / (jnp.sqrt(vs[i] / (1 - b2**t)) + eps)
        if t % 2000 == 0:
            cur = float(loss_jit(*x))
            print(f"  seed {seed} iter {t}: loss {cur:.3e}", flush=True)
            if cur < 5e-14:
                break
    from scipy.optimize import minimize

    def unpack(z):
        return jnp.array(z[:96].reshape(6, 16)), jnp.array(z[96:].reshape(4, 2))

    f = lambda z: float(loss_jit(*unpack(z)))

    def gr(z):
        g = grad_jit(*unpack(z))
        return np.concatenate([np.array(g[0]).ravel(), np.array(g[1]).ravel()])

    z0 = np.concatenate([np.array(x[0]).ravel(), np.array(x[1]).ravel()])
    res = minimize(f, z0, jac=gr, method="L-BFGS-B",
                   options={"maxiter": 20000, "ftol": 1e-19, "gtol": 1e-16})
    return res.fun, unpack(res.x)


def verify(consts, slopes, n=80, seed=5):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for th in np.concatenate([rng.uniform(0.0, 2.5, size=n), [0.0, 1e-7, 2 * np.pi]]):
        U = np.array(ansatz(consts, slopes, th))
        Ut = target_unitary(th)
        ph = np.trace(Ut.conj().T @ U)
        ph /= abs(ph)
        worst = max(worst, np.abs(U / ph - Ut).max())
    return worst


def main():
    best = (np.inf, None)
    for seed in range(12):
        val, params = optimize(seed)
        print(f"seed {seed}: final loss {val:.3e}", flush=True)
        if val < best[0]:
            best = (val, params)
        if val < 1e-13:
            break
    val, params = best
    if params is None or val > 1e-12:
        print("FAILED to fit structured family; best", val)
        return
    consts, slopes = params
    worst = verify(consts, slopes)
    print(f"verification on random thetas: max elementwise error {worst:.3e}")
    if worst < 1e-11:
        const_mats = np.array([np.array(const_gate(consts[i])) for i in range(6)])
        np.savez(
            "src/qlmsim/_plaquette_block.npz",
            const_gates=const_mats,
            slopes=np.array(slopes),
        )
        print("frozen to src/qlmsim/_plaquette_block.npz")


if __name__ == "__main__":
    main()
