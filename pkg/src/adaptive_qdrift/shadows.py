"""
Classical shadows from random single-qubit Pauli measurements.

A snapshot is a basis letter and a measured bit per qubit. The estimator
for a Pauli string multiplies, over its non-identity letters, ``3 * (+-1)``
when the measured basis matches the letter and ``0`` otherwise. This is
``Tr(P rho_hat)`` for the inverted single-qubit channel
``3 U^H |b><b| U - I`` without building any matrices.

Binary record format (``ShadowSet.to_bytes``)::

    b"SHDW"            magic
    uint8              format version (1)
    uint8              qubit count n
    uint64 LE          snapshot count m
    int64 LE           source seed (-1 if unknown)
    m * n * 2 bytes    per snapshot, per qubit: basis byte (b"X", b"Y", b"Z"),
                       outcome byte (0 or 1)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .models import PauliString

BASES = "XYZ"
_MAGIC = b"SHDW"
_HEADER = struct.Struct("<4sBBQq")

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1, -1j])
# rotate the measured basis onto the computational basis; outcome 0 <-> eigenvalue +1
_ROTATIONS = (_H, _H @ _SDG, np.eye(2, dtype=complex))

_PRODUCT_TABLE = {
    ("X", "Y"): (1j, "Z"),
    ("Y", "Z"): (1j, "X"),
    ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"),
    ("Z", "Y"): (-1j, "X"),
    ("X", "Z"): (-1j, "Y"),
}


@dataclass(frozen=True)
class Snapshot:
    bases: str
    outcomes: tuple

    def __post_init__(self):
        if len(self.bases) != len(self.outcomes):
            raise ValueError("bases and outcomes must have equal length")


@dataclass(frozen=True)
class EstimatorConfig:
    n_shots: int = 10_000
    mom_batches: int = 10
    floor_sigmas: float = 1.0

    def __post_init__(self):
        if self.n_shots < 1 or self.mom_batches < 1:
            raise ValueError("n_shots and mom_batches must be positive")
        if self.n_shots % self.mom_batches:
            raise ValueError(
                f"mom_batches={self.mom_batches} must divide n_shots={self.n_shots}"
            )
        if self.floor_sigmas < 0:
            raise ValueError("floor_sigmas must be >= 0")


class ShadowSet:
    """Snapshots stored as two ``(n_shots, n_qubits)`` uint8 arrays.

    ``bases`` holds 0, 1, 2 for X, Y, Z; ``outcomes`` holds the measured bits.
    """

    def __init__(self, bases, outcomes, source_seed=-1):
        bases = np.asarray(bases, dtype=np.uint8)
        outcomes = np.asarray(outcomes, dtype=np.uint8)
        if bases.shape != outcomes.shape or bases.ndim != 2:
            raise ValueError("bases and outcomes must be matching 2-D arrays")
        if bases.size and (bases.max() > 2 or outcomes.max() > 1):
            raise ValueError("invalid basis or outcome code")
        bases.setflags(write=False)
        outcomes.setflags(write=False)
        self.bases = bases
        self.outcomes = outcomes
        self.source_seed = int(source_seed)

    @property
    def n_shots(self):
        return self.bases.shape[0]

    @property
    def n_qubits(self):
        return self.bases.shape[1]

    def __len__(self):
        return self.n_shots

    def __getitem__(self, k):
        return Snapshot(
            "".join(BASES[b] for b in self.bases[k]), tuple(int(o) for o in self.outcomes[k])
        )

    def __eq__(self, other):
        return (
            isinstance(other, ShadowSet)
            and self.source_seed == other.source_seed
            and np.array_equal(self.bases, other.bases)
            and np.array_equal(self.outcomes, other.outcomes)
        )

    def to_bytes(self):
        body = np.empty((self.n_shots, self.n_qubits, 2), dtype=np.uint8)
        body[..., 0] = np.frombuffer(b"XYZ", dtype=np.uint8)[self.bases]
        body[..., 1] = self.outcomes
        header = _HEADER.pack(_MAGIC, 1, self.n_qubits, self.n_shots, self.source_seed)
        return header + body.tobytes()

    @classmethod
    def from_bytes(cls, data):
        magic, version, n, m, seed = _HEADER.unpack_from(data)
        if magic != _MAGIC or version != 1:
            raise ValueError("not a version-1 shadow record stream")
        body = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        if body.size != m * n * 2:
            raise ValueError(f"truncated record stream: expected {m * n * 2} bytes, got {body.size}")
        body = body.reshape(m, n, 2)
        lookup = np.full(256, 255, dtype=np.uint8)
        lookup[list(b"XYZ")] = [0, 1, 2]
        return cls(lookup[body[..., 0]], body[..., 1], seed)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _qubit_count(psi):
    if not psi.space.is_qubits:
        raise ValueError(f"classical shadows need a qubit space, got factors {psi.space.factors}")
    return len(psi.space.factors)


def _rotate(amps, setting, n):
    t = amps.reshape((2,) * n)
    for q, b in enumerate(setting):
        if b != 2:
            t = np.moveaxis(np.tensordot(_ROTATIONS[b], t, axes=([1], [q])), 0, q)
    return t.reshape(-1)


def sample_shadow(psi, n_shots, rng, source_seed=None):
    """Draw ``n_shots`` snapshots of ``psi`` with exact Born-rule sampling.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed.
    """
    n = _qubit_count(psi)
    if isinstance(rng, (int, np.integer)):
        source_seed = int(rng) if source_seed is None else source_seed
        rng = np.random.default_rng(int(rng))
    bases = rng.integers(0, 3, size=(n_shots, n), dtype=np.uint8)
    u = rng.random(n_shots)
    codes = bases.astype(np.int64) @ (3 ** np.arange(n - 1, -1, -1))
    outcomes_flat = np.empty(n_shots, dtype=np.int64)
    amps = psi.amplitudes
    for code in np.unique(codes):
        rows = np.nonzero(codes == code)[0]
        probs = np.abs(_rotate(amps, bases[rows[0]], n)) ** 2
        cdf = np.cumsum(probs)
        idx = np.searchsorted(cdf, u[rows] * cdf[-1], side="right")
        outcomes_flat[rows] = np.minimum(idx, len(cdf) - 1)
    shifts = np.arange(n - 1, -1, -1)
    outcomes = ((outcomes_flat[:, None] >> shifts) & 1).astype(np.uint8)
    return ShadowSet(bases, outcomes, -1 if source_seed is None else source_seed)


def sample_snapshot(psi, rng):
    return sample_shadow(psi, 1, rng)[0]


def _letter_codes(letters):
    # I -> -1, X -> 0, Y -> 1, Z -> 2 (matching the basis codes)
    return np.array(["IXYZ".index(c) - 1 for c in letters], dtype=np.int8)


def pauli_snapshot_values(shadow, strings):
    """Per-snapshot single-shot estimates, shape ``(len(strings), n_shots)``."""
    if shadow.n_shots == 0:
        raise ValueError("empty shadow set")
    codes = np.array([_letter_codes(s) for s in strings], dtype=np.int8)
    if codes.shape[1] != shadow.n_qubits:
        raise ValueError(f"Pauli strings must have length {shadow.n_qubits}")
    signs = 3.0 * (1.0 - 2.0 * shadow.outcomes)
    match = shadow.bases[None, :, :] == codes[:, None, :]
    ident = (codes < 0)[:, None, :]
    factors = np.where(ident, 1.0, np.where(match, signs[None], 0.0))
    return factors.prod(axis=2)


def median_of_means(values, batches):
    values = np.asarray(values, dtype=float)
    if batches == 1:
        return float(values.mean(axis=-1)) if values.ndim == 1 else values.mean(axis=-1)
    if values.shape[-1] % batches:
        raise ValueError(f"{batches} batches do not divide {values.shape[-1]} samples")
    means = values.reshape(*values.shape[:-1], batches, -1).mean(axis=-1)
    return np.median(means, axis=-1) if values.ndim > 1 else float(np.median(means))


def estimate_pauli(shadow, letters, mom_batches=1):
    """Estimate ``<P>`` for a coefficient-free Pauli string (str or PauliString)."""
    if isinstance(letters, PauliString):
        letters = letters.letters
    if set(letters) <= {"I"}:
        if len(letters) != shadow.n_qubits:
            raise ValueError(f"Pauli strings must have length {shadow.n_qubits}")
        if shadow.n_shots == 0:
            raise ValueError("empty shadow set")
        return 1.0
    return median_of_means(pauli_snapshot_values(shadow, [letters])[0], mom_batches)


def pauli_product(a, b):
    """``a * b`` as ``(phase, PauliString)`` with phase in {1, -1, 1j, -1j}."""
    if len(a.letters) != len(b.letters):
        raise ValueError("Pauli strings must have equal length")
    phase = 1 + 0j
    out = []
    for x, y in zip(a.letters, b.letters):
        if x == "I":
            out.append(y)
        elif y == "I":
            out.append(x)
        elif x == y:
            out.append("I")
        else:
            ph, z = _PRODUCT_TABLE[(x, y)]
            phase *= ph
            out.append(z)
    return phase, PauliString(a.coefficient * b.coefficient, "".join(out))


class MomentPlan:
    """Pauli expansions of ``H_j`` and ``H_j^2`` for repeated shadow estimation."""

    def __init__(self, paulis):
        paulis = list(paulis)
        if not paulis:
            raise ValueError("empty Pauli decomposition")
        n = len(paulis[0].letters)
        self.n_qubits = n
        identity = "I" * n
        lin = {}
        for p in paulis:
            lin[p.letters] = lin.get(p.letters, 0.0) + p.coefficient
        sq = {}
        for p in paulis:
            for q in paulis:
                phase, r = pauli_product(p, q)
                sq[r.letters] = sq.get(r.letters, 0) + phase * r.coefficient
        # imaginary parts cancel pairwise between (l, m) and (m, l)
        sq = {k: v.real for k, v in sorted(sq.items()) if abs(v) > 1e-14}
        self.linear_const = lin.pop(identity, 0.0)
        self.square_const = sq.pop(identity, 0.0)
        self.strings = sorted(set(lin) | set(sq))
        self.linear = np.array([lin.get(s, 0.0) for s in self.strings])
        self.square = np.array([sq.get(s, 0.0) for s in self.strings])

    def snapshot_values(self, shadow):
        """Per-snapshot estimates of ``H_j`` and ``H_j^2``."""
        if shadow.n_shots == 0:
            raise ValueError("empty shadow set")
        if self.strings:
            vals = pauli_snapshot_values(shadow, self.strings)
            v1 = self.linear @ vals + self.linear_const
            v2 = self.square @ vals + self.square_const
        else:
            v1 = np.full(shadow.n_shots, self.linear_const)
            v2 = np.full(shadow.n_shots, self.square_const)
        return v1, v2

    def estimate(self, shadow, config=None):
        """Return ``(mean, second_moment, variance_standard_error)``."""
        k = 1 if config is None else config.mom_batches
        v1, v2 = self.snapshot_values(shadow)
        mean = median_of_means(v1, k)
        m2 = median_of_means(v2, k)
        n = len(v1)
        # delta method for Var(m2 - mean^2)
        se = float(np.std(v2 - 2.0 * mean * v1) / np.sqrt(n)) if n > 1 else float("inf")
        return mean, m2, se


def estimate_term_deviation(shadow, plan, config):
    """``(deviation, variance, variance_standard_error)`` with the noise floor applied.

    A variance estimate within ``config.floor_sigmas`` standard errors of zero
    is reported as an exact zero.
    """
    mean, m2, se = plan.estimate(shadow, config)
    var = m2 - mean * mean
    if var < config.floor_sigmas * se:
        return 0.0, var, se
    return float(np.sqrt(var)), var, se


def estimate_term_moments(shadow, term_paulis, config=None):
    """Estimate ``(<H_j>, <H_j^2>)`` from one shadow set."""
    mean, m2, _ = MomentPlan(term_paulis).estimate(shadow, config)
    return mean, m2
