"""Search for a depth-7, 14-gate brickwork realization of the plaquette block.

Target: U(theta) = exp(-i theta (|1100><0011| + h.c.)) on 4 qubits.
Ansatz: 7 layers, each holding two 2-qubit gates on disjoint pairs; every
gate is a free U(4) parametrized as expm(-i H) with H hermitian.

Run standalone; prints the best loss per structure and, on success, dumps
the optimized parameters for inspection of their theta dependence.
"""

import itertools
import numpy as np
import jax
import jax.numpy as jnp
from jax.scipy.linalg import expm

jax.config.update("jax_enable_x64", True)

N = 4
DIM = 16

# pairings of 4 qubits into two disjoint pairs
P1 = ((0, 1), (2, 3))
P2 = ((0, 2), (1, 3))
P3 = ((0, 3), (1, 2))


def target_unitary(theta: float) -> np.ndarray:
    # basis index: bit q of the index is qubit q (little-endian)
    a = 0b0011  # qubits 0,1 set  (b=1, r=1, t=0, l=0)
    b = 0b1100  # qubits 2,3 set
    T = np.zeros((DIM, DIM))
    T[a, b] = T[b, a] = 1.0
    U = np.eye(DIM, dtype=complex)
    U[a, a] = U[b, b] = np.cos(theta)
    U[a, b] = U[b, a] = -1j * np.sin(theta)
    return U


# Pauli basis for parametrizing 4x4 hermitians
_P1Q = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
PAULI4 = np.stack([np.kron(p, q) for p in _P1Q for q in _P1Q]).astype(complex)  # (16,4,4)


def embed(gate4, pair):
    """Embed a 4x4 gate acting on qubit pair into the 16x16 space."""
    q0, q1 = pair
    U = np.zeros((DIM, DIM), dtype=complex)
    rest = [q for q in range(N) if q not in pair]
    for i in range(DIM):
        b0, b1 = (i >> q0) & 1, (i >> q1) & 1
        for a0 in range(2):
            for a1 in range(2):
                j = i & ~((1 << q0) | (1 << q1)) | (a0 << q0) | (a1 << q1)
                U[j, i] = gate4[a0 + 2 * a1, b0 + 2 * b1]
    return U


# jax version: build the embedding indices once per pair
def make_apply(pair):
    q0, q1 = pair
    # permutation that groups (q0,q1) bits as leading axes
    perm_in = np.zeros(DIM, dtype=int)
    for i in range(DIM):
        b0, b1 = (i >> q0) & 1, (i >> q1) & 1
        rest = i & ~((1 << q0) | (1 << q1))
        # compress rest bits
        rbits = [(i >> q) & 1 for q in range(N) if q not in (q0, q1)]
        r = rbits[0] | (rbits[1] << 1)
        perm_in[(b0 + 2 * b1) * 4 + r] = i
    inv = np.argsort(perm_in)

    def apply(gate4, U):
        # U: (16,16) matrix; multiply embedded gate on the left
        M = U[perm_in, :].reshape(4, 4, DIM)
        M = jnp.einsum("ab,bri->ari", gate4, M).reshape(DIM, DIM)
        return M[inv, :]

    return apply


def build_loss(structure, theta):
    Ut = jnp.array(target_unitary(theta))
    appliers = [(make_apply(pa), make_apply(pb)) for pa, pb in structure]
    P = jnp.array(PAULI4)

    def ansatz(params):
        U = jnp.eye(DIM, dtype=complex)
        k = 0
        for (fa, fb), (pa, pb) in zip(appliers, structure):
            Ha = jnp.einsum("k,kij->ij", params[k], P); k += 1
            Hb = jnp.einsum("k,kij->ij", params[k], P); k += 1
            U = fa(expm(-1j * Ha), U)
            U = fb(expm(-1j * Hb), U)
        return U

    def loss(params):
        U = ansatz(params)
        return 1.0 - jnp.abs(jnp.trace(U.conj().T @ Ut)) / DIM

    return jax.jit(loss), jax.jit(jax.grad(loss))


def optimize(structure, theta, seed, iters=4000):
    loss, grad = build_loss(structure, theta)
    rng = np.random.default_rng(seed)
    x = jnp.array(rng.normal(scale=0.2, size=(14, 16)))
    # Adam
    m = jnp.zeros_like(x); v = jnp.zeros_like(x)
    lr, b1, b2, eps = 0.02, 0.9, 0.999, 1e-9
    best = np.inf
    for t in range(1, iters + 1):
        g = grad(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1**t)) / (jnp.sqrt(v / (1 - b2**t)) + eps)
        if t % 500 == 0:
            cur = float(loss(x))
            best = min(best, cur)
            if cur < 1e-10:
                break
    # polish with scipy
    from scipy.optimize import minimize

    f = lambda z: float(loss(jnp.array(z.reshape(14, 16))))
    gr = lambda z: np.array(grad(jnp.array(z.reshape(14, 16)))).ravel()
    res = minimize(f, np.array(x).ravel(), jac=gr, method="L-BFGS-B",
                   options={"maxiter": 3000, "ftol": 1e-18, "gtol": 1e-14})
    return res.fun, res.x


def main():
    theta = 0.37
    structures = {
        "P1P2alt": [P1, P2, P1, P2, P1, P2, P1],
        "P1P3alt": [P1, P3, P1, P3, P1, P3, P1],
        "P2P1alt": [P2, P1, P2, P1, P2, P1, P2],
        "mix": [P1, P2, P3, P1, P3, P2, P1],
    }
    for name, st in structures.items():
        best = np.inf
        for seed in range(3):
            val, x = optimize(st, theta, seed)
            best = min(best, val)
            if val < 1e-12:
                np.save(f"/tmp/plq_{name}_{seed}.npy", x)
                break
        print(f"{name}: best loss {best:.3e}")


if __name__ == "__main__":
    main()
