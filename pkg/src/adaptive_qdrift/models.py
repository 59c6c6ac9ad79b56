"""
Benchmark Hamiltonians as grouped term sets.

Three models, each split into three grouped terms:

* mixed-field Ising chain: ``zz`` coupling, transverse ``x`` field, longitudinal ``z`` field
* driven Kerr oscillator: ``detuning``, ``kerr``, ``drive``
* quantum Rabi model: ``cavity``, ``qubit``, ``coupling``

Hybrid spaces put the bosonic factor first and the qubit after, so the
Rabi basis state ``|n, s>`` has flattened index ``2 n + s``. Qubit chains
label basis states ``|b_0 b_1 ...>`` with qubit 0 the most significant digit.

Terms whose matrix is identically zero (e.g. ``h_z = 0``) are dropped at
build time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .hilbert import (
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    HermitianOperator,
    HilbertSpace,
    StateVector,
    annihilation,
    number,
    spectral_norm,
    tensor_embed,
)

PAULI_LETTERS = "IXYZ"
PAULI_MATRICES = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}
PAULI_DROP_TOL = 1e-12


@dataclass(frozen=True)
class Term:
    label: str
    operator: HermitianOperator
    weight: float | None = None

    def __post_init__(self):
        if self.weight is not None and not self.weight > 0:
            raise ValueError(f"term {self.label!r}: weight must be positive, got {self.weight}")


class HamiltonianTermSet:
    """Ordered decomposition ``H = sum_j H_j`` plus optional QDRIFT weights ``h_j``."""

    def __init__(self, space, terms, metadata=None):
        terms = list(terms)
        if not terms:
            raise ValueError("a term set needs at least one term")
        for term in terms:
            if term.operator.space != space:
                raise ValueError(f"term {term.label!r} lives on a different space")
        self.space = space
        self.terms = tuple(terms)
        self.total = HermitianOperator(space, sum(t.operator.matrix for t in terms), check=False)
        self.metadata = dict(metadata or {})

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, j):
        return self.terms[j]

    @property
    def labels(self):
        return [t.label for t in self.terms]

    @property
    def operators(self):
        return [t.operator for t in self.terms]

    @property
    def weights(self):
        return [t.weight for t in self.terms]

    def prepare(self):
        """Diagonalise every term and the total once, up front."""
        for op in (*self.operators, self.total):
            op.eigh()
        return self


def _collect(space, pieces, weighted):
    """Build terms from ``(label, matrix, bounded)``; zero matrices are dropped."""
    terms = []
    for label, matrix, bounded in pieces:
        if not np.any(matrix):
            continue
        op = HermitianOperator(space, matrix)
        w = spectral_norm(op) if (weighted or bounded) else None
        terms.append(Term(label, op, w))
    return terms


# -- model specifications ---------------------------------------------------


@dataclass(frozen=True)
class MFIMSpec:
    chain_length: int = 4
    J: float = 1.0
    h_x: float = 0.5
    h_z: float = 0.3
    boundary: str = "periodic"
    initial: tuple = ((0, 0, 1, 1),)

    tag = "mfim"

    def __post_init__(self):
        if self.chain_length < 2:
            raise ValueError("chain_length must be >= 2")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")
        if self.boundary == "periodic" and self.chain_length == 2:
            raise ValueError(
                "periodic boundary with chain_length=2 counts the single bond twice; "
                "use boundary='open' for two sites"
            )
        _check_finite(self.J, self.h_x, self.h_z)


@dataclass(frozen=True)
class KerrSpec:
    detuning: float = 0.3
    K: float = 1.0
    epsilon: float = 0.5
    D: int = 50
    initial: tuple = ((1,), (5,))

    tag = "kerr"

    def __post_init__(self):
        if self.D < 2:
            raise ValueError("truncation dimension D must be >= 2")
        _check_finite(self.detuning, self.K, self.epsilon)


@dataclass(frozen=True)
class RabiSpec:
    omega: float = 1.0
    Omega: float = 1.0
    g: float = 0.2
    D: int = 50
    initial: tuple = ((2, 0), (5, 0))

    tag = "rabi"

    def __post_init__(self):
        if self.D < 2:
            raise ValueError("truncation dimension D must be >= 2")
        _check_finite(self.omega, self.Omega, self.g)


def _check_finite(*xs):
    if not all(np.isfinite(x) for x in xs):
        raise ValueError(f"couplings must be finite, got {xs}")


def build_mfim(spec):
    L = spec.chain_length
    space = HilbertSpace.qubits(L)
    z = [tensor_embed(PAULI_Z, i, space).matrix for i in range(L)]
    x = [tensor_embed(PAULI_X, i, space).matrix for i in range(L)]
    bonds = [(i, i + 1) for i in range(L - 1)]
    if spec.boundary == "periodic":
        bonds.append((L - 1, 0))
    zz = -spec.J * sum(z[i] @ z[k] for i, k in bonds)
    hx = -spec.J * spec.h_x * sum(x)
    hz = -spec.J * spec.h_z * sum(z)
    terms = _collect(space, [("zz", zz, True), ("x", hx, True), ("z", hz, True)], True)
    return HamiltonianTermSet(space, terms, {"model": "mfim", "factor_order": "qubit 0 first"})


def build_kerr(spec, truncation_weights=True):
    """Kerr oscillator terms. ``truncation_weights=False`` leaves the unbounded terms unweighted."""
    D = spec.D
    space = HilbertSpace((D,))
    a = annihilation(D)
    ad = a.conj().T
    pieces = [
        ("detuning", spec.detuning * number(D), False),
        ("kerr", 0.5 * spec.K * (ad @ ad @ a @ a), False),
        ("drive", spec.epsilon * (a + ad), False),
    ]
    terms = _collect(space, pieces, truncation_weights)
    return HamiltonianTermSet(space, terms, {"model": "kerr", "factor_order": "boson"})


def build_rabi(spec, truncation_weights=True):
    """Rabi model terms on boson (x) qubit."""
    D = spec.D
    space = HilbertSpace((D, 2))
    a = annihilation(D)
    ad = a.conj().T
    pieces = [
        ("cavity", spec.omega * np.kron(number(D), PAULI_I), False),
        ("qubit", 0.5 * spec.Omega * np.kron(np.eye(D), PAULI_Z), True),
        ("coupling", spec.g * np.kron(a + ad, PAULI_X), False),
    ]
    terms = _collect(space, pieces, truncation_weights)
    return HamiltonianTermSet(space, terms, {"model": "rabi", "factor_order": "boson, qubit"})


def build_model(spec, truncation_weights=True):
    if isinstance(spec, MFIMSpec):
        return build_mfim(spec)
    if isinstance(spec, KerrSpec):
        return build_kerr(spec, truncation_weights)
    if isinstance(spec, RabiSpec):
        return build_rabi(spec, truncation_weights)
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def model_space(spec):
    if isinstance(spec, MFIMSpec):
        return HilbertSpace.qubits(spec.chain_length)
    if isinstance(spec, KerrSpec):
        return HilbertSpace((spec.D,))
    if isinstance(spec, RabiSpec):
        return HilbertSpace((spec.D, 2))
    raise TypeError(f"unknown model spec {type(spec).__name__}")


def initial_state(spec):
    """Equal-weight superposition of the basis states listed in ``spec.initial``."""
    space = model_space(spec)
    if not spec.initial:
        raise ValueError("initial state descriptor is empty")
    amps = np.zeros(space.total_dim, dtype=complex)
    for labels in spec.initial:
        amps[space.index(labels)] += 1.0
    return StateVector.from_amplitudes(space, amps)


# -- Pauli strings ------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    coefficient: float
    letters: str

    def __post_init__(self):
        if any(c not in PAULI_LETTERS for c in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if not np.isfinite(self.coefficient):
            raise ValueError("Pauli coefficient must be finite")

    @property
    def weight(self):
        return sum(c != "I" for c in self.letters)

    def matrix(self):
        return self.coefficient * reduce(np.kron, [PAULI_MATRICES[c] for c in self.letters])


# B[a, 2r + c] = sigma_a[c, r] so that contracting with A[r, c] gives Tr(sigma_a A)
_PAULI_BASIS = np.array([PAULI_MATRICES[c].T.reshape(-1) for c in PAULI_LETTERS])


def pauli_decompose(op):
    """Real Pauli coefficients ``Tr(P A) / 2^n`` of a qubit operator; tiny ones dropped."""
    space = op.space
    if not space.is_qubits:
        raise ValueError(f"Pauli decomposition needs qubit factors, got {space.factors}")
    n = len(space.factors)
    t = op.matrix.reshape((2,) * (2 * n))
    # interleave row/column indices per qubit -> (r0, c0, r1, c1, ...)
    order = [ax for k in range(n) for ax in (k, n + k)]
    t = t.transpose(order).reshape((4,) * n)
    for k in range(n):
        t = np.tensordot(_PAULI_BASIS, t, axes=([1], [k]))
        t = np.moveaxis(t, 0, k)
    coeffs = t / 2**n
    out = []
    for idx in itertools.product(range(4), repeat=n):
        c = coeffs[idx]
        if abs(c) < PAULI_DROP_TOL:
            continue
        if abs(c.imag) > 1e-10:
            raise ValueError("non-Hermitian input: complex Pauli coefficient")
        out.append(PauliString(float(c.real), "".join(PAULI_LETTERS[i] for i in idx)))
    return out


def pauli_sum_matrix(strings, n_qubits):
    out = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
    for p in strings:
        out += p.matrix()
    return out
