"""
Dense linear algebra over composite Hilbert spaces.

States, Hermitian operators and density matrices are thin immutable
wrappers around numpy arrays that carry the space they live on. Matrix
exponentials are always taken through a cached eigendecomposition, so a
term is diagonalised once and then reused for every step of every
trajectory.

Factor ordering is fixed at construction. Basis index digits follow the
factor order with the first factor most significant (``np.kron`` order).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import reduce

import numpy as np

HERMITIAN_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10
NORM_TOL = 1e-10
VARIANCE_CLAMP = 1e-12

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class SpaceMismatchError(ValueError):
    """Objects built on different Hilbert spaces were combined."""


class HermiticityError(ValueError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HilbertSpace:
    factors: tuple

    def __post_init__(self):
        factors = tuple(int(d) for d in self.factors)
        if not factors:
            raise ValueError("a Hilbert space needs at least one factor")
        if any(d < 2 for d in factors):
            raise ValueError(f"every factor dimension must be >= 2, got {factors}")
        object.__setattr__(self, "factors", factors)

    @property
    def total_dim(self):
        return int(np.prod(self.factors))

    @property
    def is_qubits(self):
        return all(d == 2 for d in self.factors)

    @classmethod
    def qubits(cls, n):
        return cls((2,) * n)

    def index(self, labels):
        """Flattened basis index of a product basis state given per-factor labels."""
        labels = tuple(int(x) for x in labels)
        if len(labels) != len(self.factors):
            raise ValueError(f"expected {len(self.factors)} labels, got {len(labels)}")
        for lab, d in zip(labels, self.factors):
            if not 0 <= lab < d:
                raise ValueError(f"basis label {lab} out of range for factor of dimension {d}")
        return int(np.ravel_multi_index(labels, self.factors))


def _check_same_space(*objs):
    space = objs[0].space
    for o in objs[1:]:
        if o.space != space:
            raise SpaceMismatchError(f"space mismatch: {space.factors} vs {o.space.factors}")


@dataclass(frozen=True)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (self.space.total_dim,):
            raise ValueError(
                f"state has {amps.size} amplitudes, space dimension is {self.space.total_dim}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @classmethod
    def from_amplitudes(cls, space, amplitudes):
        """Normalize ``amplitudes`` and wrap them."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(space, amps / norm)

    @classmethod
    def basis(cls, space, labels):
        amps = np.zeros(space.total_dim, dtype=complex)
        amps[space.index(labels)] = 1.0
        return cls(space, amps)

    def density_matrix(self):
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))


class HermitianOperator:
    """Dense Hermitian matrix on a :class:`HilbertSpace` with a lazy spectral cache."""

    def __init__(self, space, matrix, check=True):
        m = np.asarray(matrix, dtype=complex)
        n = space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"operator shape {m.shape} does not match space dimension {n}")
        if check:
            asym = _max_asymmetry(m)
            if asym > HERMITIAN_TOL * max(1.0, float(np.abs(m).max(initial=0.0))):
                raise HermiticityError(f"matrix is not Hermitian: max |A - A^H| = {asym:.3e}")
        self.space = space
        self.matrix = _readonly(m)
        self._eigen = None
        self._lock = threading.Lock()

    @property
    def eigen(self):
        """``(eigenvalues, eigenvectors)`` or None if not yet computed."""
        return self._eigen

    def eigh(self):
        """Return the cached ``(eigenvalues, eigenvectors, eigenvectors^H)``."""
        e = self._eigen
        if e is None:
            with self._lock:
                if self._eigen is None:
                    w, v = np.linalg.eigh(self.matrix)
                    self._eigen = (_readonly(w), _readonly(v), _readonly(v.conj().T))
                e = self._eigen
        return e

    def __add__(self, other):
        _check_same_space(self, other)
        return HermitianOperator(self.space, self.matrix + other.matrix, check=False)

    def __mul__(self, c):
        c = float(c)
        return HermitianOperator(self.space, c * self.matrix, check=False)

    __rmul__ = __mul__

    def __matmul__(self, other):
        # product of two Hermitian operators is Hermitian only if they commute
        _check_same_space(self, other)
        return HermitianOperator(self.space, self.matrix @ other.matrix)

    def __getstate__(self):
        return {"space": self.space, "matrix": self.matrix, "_eigen": self._eigen}

    def __setstate__(self, state):
        self.space = state["space"]
        self.matrix = state["matrix"]
        self._eigen = state["_eigen"]
        self._lock = threading.Lock()

    def __repr__(self):
        return f"HermitianOperator(factors={self.space.factors})"


@dataclass(frozen=True)
class DensityMatrix:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"density matrix shape {m.shape} does not match dimension {n}")
        object.__setattr__(self, "matrix", _readonly(m))

    def check(self, tol=RECONSTRUCTION_TOL):
        """Raise if Hermiticity, unit trace or positivity is violated."""
        m = self.matrix
        asym = _max_asymmetry(m)
        if asym > HERMITIAN_TOL:
            raise HermiticityError(f"density matrix not Hermitian: {asym:.3e}")
        tr = np.trace(m).real
        if abs(tr - 1) > tol:
            raise ValueError(f"density matrix trace {tr!r} != 1")
        lo = np.linalg.eigvalsh(m).min()
        if lo < -tol:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        return self

    def overlap(self, psi):
        """``<psi| rho |psi>``, the fidelity with a pure state."""
        _check_same_space(self, psi)
        a = psi.amplitudes
        return float(np.vdot(a, self.matrix @ a).real)


def _max_asymmetry(m):
    return float(np.abs(m - m.conj().T).max(initial=0.0))


def hermitian_eigendecompose(op):
    """Populate the eigen cache of ``op`` and return it."""
    asym = _max_asymmetry(op.matrix)
    if asym > HERMITIAN_TOL * max(1.0, float(np.abs(op.matrix).max(initial=0.0))):
        raise HermiticityError(f"matrix is not Hermitian: max |A - A^H| = {asym:.3e}")
    op.eigh()
    return op


def apply_exp(term, tau, psi):
    """``exp(-i term tau) |psi>`` through the spectral cache."""
    _check_same_space(term, psi)
    w, v, vh = term.eigh()
    out = v @ (np.exp(-1j * w * tau) * (vh @ psi.amplitudes))
    return StateVector(psi.space, out / np.linalg.norm(out))


def evolve_exact(H, psi0, t):
    """Exact ``exp(-i H t) |psi0>`` from the eigendecomposition of the summed Hamiltonian."""
    if t == 0:
        _check_same_space(H, psi0)
        return psi0
    return apply_exp(H, t, psi0)


def expectation(op, psi):
    _check_same_space(op, psi)
    a = psi.amplitudes
    return float(np.vdot(a, op.matrix @ a).real)


def variance(op, psi):
    """``<A^2> - <A>^2``; tiny negative round-off is clamped to zero."""
    _check_same_space(op, psi)
    a = psi.amplitudes
    v = op.matrix @ a
    mean = np.vdot(a, v).real
    var = np.vdot(v, v).real - mean * mean
    if var < 0:
        if var < -VARIANCE_CLAMP * max(1.0, mean * mean):
            raise ArithmeticError(f"negative variance {var:.3e}: internal inconsistency")
        var = 0.0
    return float(var)


def standard_deviation(op, psi):
    return float(np.sqrt(variance(op, psi)))


def qfi(generator, psi):
    """Quantum Fisher information of a pure state under a unitary generator."""
    return 4.0 * variance(generator, psi)


def fidelity_pure(a, b):
    _check_same_space(a, b)
    f = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(max(f, 0.0), 1.0))


def spectral_norm(op):
    w = op.eigh()[0]
    return float(np.abs(w).max())


def tensor_embed(local, site, space):
    """Embed a single-factor matrix at ``site``, identity elsewhere."""
    local = np.asarray(local, dtype=complex)
    if not 0 <= site < len(space.factors):
        raise IndexError(f"site {site} out of range for {len(space.factors)} factors")
    d = space.factors[site]
    if local.shape != (d, d):
        raise ValueError(f"local operator shape {local.shape} does not match factor dimension {d}")
    mats = [local if k == site else np.eye(dk) for k, dk in enumerate(space.factors)]
    return HermitianOperator(space, reduce(np.kron, mats))


def annihilation(dim):
    """Truncated bosonic lowering operator, ``<n-1|a|n> = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number(dim):
    return np.diag(np.arange(dim, dtype=float)).astype(complex)
