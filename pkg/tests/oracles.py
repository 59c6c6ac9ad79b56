"""Independent reference computations used to derive expected test values.

None of these touch the package's spectral caches or builders.
"""

import numpy as np


def taylor_expm_apply(A, tau, psi, order=40):
    """``exp(-i A tau) psi`` by a truncated Taylor series."""
    out = psi.astype(complex).copy()
    term = out.copy()
    for k in range(1, order + 1):
        term = (-1j * tau / k) * (A @ term)
        out = out + term
    return out


def rk4_schrodinger(H, psi0, t, dt=1e-4):
    """Fixed-step RK4 for ``d psi/dt = -i H psi``."""
    f = lambda y: -1j * (H @ y)  # noqa: E731
    y = psi0.astype(complex).copy()
    n = int(round(t / dt))
    h = t / n
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def mfim_bruteforce(L, J, hx, hz, periodic=True):
    """Dense MFIM terms from bit manipulation, qubit 0 = most significant bit."""
    dim = 2**L
    zz = np.zeros((dim, dim))
    x = np.zeros((dim, dim))
    z = np.zeros((dim, dim))
    bonds = [(i, i + 1) for i in range(L - 1)] + ([(L - 1, 0)] if periodic else [])
    for s in range(dim):
        bits = [(s >> (L - 1 - i)) & 1 for i in range(L)]
        spins = [1 - 2 * b for b in bits]
        zz[s, s] = -J * sum(spins[i] * spins[k] for i, k in bonds)
        z[s, s] = -J * hz * sum(spins)
        for i in range(L):
            x[s ^ (1 << (L - 1 - i)), s] += -J * hx
    return zz, x, z


def haar_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_hermitian(dim, rng, scale=1.0):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (a + a.conj().T) / 2


def project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u * k > css - 1)[0][-1]
    theta = (css[rho] - 1) / (rho + 1)
    return np.maximum(v - theta, 0)


def simplex_minimize_cost(dev, iters=10_000, step=1e-2, tol=1e-10):
    """Projected gradient descent for ``min sum d_j^2 / p_j`` over the simplex.

    The objective is normalized by ``(sum d)^2`` so the fixed step is
    scale-free; a step that raises the objective is halved.
    """
    d = np.asarray(dev, dtype=float) / np.sum(dev)
    f = lambda p: np.sum(d**2 / np.maximum(p, 1e-300))  # noqa: E731
    p = np.full(len(d), 1.0 / len(d))
    eta = step
    for _ in range(iters):
        grad = -(d**2) / np.maximum(p, 1e-15) ** 2
        q = project_simplex(p - eta * grad)
        if f(q) > f(p):
            eta *= 0.5
            continue
        done = np.max(np.abs(q - p)) < tol
        p = q
        if done:
            break
    return p
