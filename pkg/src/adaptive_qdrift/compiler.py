"""
Randomized product-formula compilation with fixed or fluctuation-adaptive sampling.

Each step draws a term index ``j`` with probability ``p_j`` and applies
``exp(-i H_j tau_j)`` with ``tau_j = t / (N p_j)``. Fixed strategies use one
distribution for the whole run. The adaptive strategy recomputes
``p_j = dH_j / sum_k dH_k`` from the current state every step, where
``dH_j`` is the standard deviation of ``H_j``.

Trajectories are simulated in batches: states are the columns of a
``(dim, B)`` array and each trajectory owns its own random generator.
Every trajectory draws its N selection uniforms before anything else, so
results only depend on the generator, never on which batch it ran in.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import DensityMatrix, StateVector, evolve_exact, variance
from .models import pauli_decompose
from .shadows import EstimatorConfig, MomentPlan, estimate_term_deviation, sample_shadow

log = logging.getLogger(__name__)

PROB_TOL = 1e-12
NEGATIVE_VARIANCE_WARN = -1e-8


@dataclass(frozen=True)
class FixedQDrift:
    """``p_j = h_j / sum_k h_k`` from the term weights (hard truncation for bosonic terms)."""

    name = "qdrift"
    adaptive = False


@dataclass(frozen=True)
class EqualWeight:
    name = "equal"
    adaptive = False


@dataclass(frozen=True)
class FluctuationAdaptive:
    """``p_j`` proportional to the standard deviation of ``H_j`` on the current state.

    ``shadows=None`` reads moments from the state vector; an
    :class:`EstimatorConfig` estimates them from classical shadows instead.
    """

    var_floor: float = 1e-12
    shadows: EstimatorConfig | None = None

    adaptive = True

    def __post_init__(self):
        if self.var_floor < 0:
            raise ValueError("var_floor must be >= 0")

    @property
    def name(self):
        return "adaptive" if self.shadows is None else "adaptive-shadows"


def validate_probabilities(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probabilities must be a non-empty vector")
    if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
        raise ValueError(f"not a probability vector: {p} (sum={p.sum()!r})")
    return p


def fixed_probabilities(terms, strategy):
    if isinstance(strategy, EqualWeight):
        return np.full(len(terms), 1.0 / len(terms))
    if isinstance(strategy, FixedQDrift):
        weights = terms.weights
        missing = [t.label for t in terms if t.weight is None]
        if missing:
            raise ValueError(
                f"terms {missing} carry no weight h_j (unbounded operators); "
                "use EqualWeight or build the model with truncation weights"
            )
        h = np.asarray(weights, dtype=float)
        return h / h.sum()
    raise TypeError(f"{type(strategy).__name__} is not a fixed strategy")


def exact_moments(terms, psi):
    """Arrays ``(<H_j>, <H_j^2>)`` over the terms for a single state."""
    a = psi.amplitudes
    means, m2 = [], []
    for op in terms.operators:
        v = op.matrix @ a
        means.append(np.vdot(a, v).real)
        m2.append(np.vdot(v, v).real)
    return np.array(means), np.array(m2)


def deviations_from_moments(means, second_moments, var_floor=1e-12):
    """Standard deviations ``sqrt(max(m2 - m1^2, 0))``.

    A variance below ``var_floor * max(1, m2)`` is treated as exactly zero,
    since cancellation in ``m2 - m1^2`` leaves round-off of that relative size.

    Returns ``(deviations, n_clamped)`` where ``n_clamped`` counts variances
    more negative than -1e-8, which only shot noise can produce.
    """
    m2 = np.asarray(second_moments, dtype=float)
    var = m2 - np.asarray(means, dtype=float) ** 2
    n_clamped = int(np.count_nonzero(var < NEGATIVE_VARIANCE_WARN))
    if n_clamped:
        log.debug("clamped %d negative variance estimate(s) to zero", n_clamped)
    var = np.where(var < var_floor * np.maximum(1.0, m2), 0.0, var)
    dev = np.sqrt(var)
    return dev, n_clamped


def probabilities_from_deviations(dev):
    """Normalize deviations along axis 0; an all-zero column becomes uniform."""
    dev = np.asarray(dev, dtype=float)
    total = dev.sum(axis=0)
    zero = total == 0
    safe = np.where(zero, 1.0, total)
    p = np.where(zero, 1.0 / dev.shape[0], dev / safe)
    return p


def fluctuation_probabilities(means, second_moments, var_floor=1e-12):
    """Optimal sampling distribution ``p_j = dH_j / sum_k dH_k``."""
    dev, _ = deviations_from_moments(means, second_moments, var_floor)
    return probabilities_from_deviations(dev)


def cost_epsilon(deviations, probs):
    """``sum_j dH_j^2 / p_j``; ``inf`` if a fluctuating term has zero probability."""
    d = np.asarray(deviations, dtype=float)
    p = np.asarray(probs, dtype=float)
    live = d > 0
    if np.any(live & (p <= 0)):
        return math.inf
    return float(np.sum(d[live] ** 2 / p[live]))


def predicted_fidelity(psi, terms, probs, t, N):
    """Second-order fidelity ``1 + (t/N)^2 [dH^2 - sum_j dH_j^2 / p_j]``."""
    dev, _ = deviations_from_moments(*exact_moments(terms, psi))
    eps = cost_epsilon(dev, probs)
    if math.isinf(eps):
        return -math.inf
    return 1.0 + (t / N) ** 2 * (variance(terms.total, psi) - eps)


def _step_unitaries(terms, probs, t, N):
    out = []
    for op, p in zip(terms.operators, probs):
        if p <= 0:
            continue
        w, v, vh = op.eigh()
        tau = t / (N * p)
        out.append((p, (v * np.exp(-1j * w * tau)) @ vh))
    return out


def exact_channel_step(rho, terms, probs, t, N):
    """One step of the averaged channel ``sum_j p_j U_j rho U_j^H``."""
    if rho.space != terms.space:
        raise ValueError("density matrix and terms live on different spaces")
    probs = validate_probabilities(probs)
    m = sum(p * (u @ rho.matrix @ u.conj().T) for p, u in _step_unitaries(terms, probs, t, N))
    return DensityMatrix(rho.space, m)


def channel_fidelity(terms, psi0, probs, t, N):
    """``<psi(t)| E^N(rho0) |psi(t)>`` for a fixed distribution: the exact trajectory mean."""
    probs = validate_probabilities(probs)
    units = _step_unitaries(terms, probs, t, N)
    rho = np.outer(psi0.amplitudes, psi0.amplitudes.conj())
    for _ in range(N):
        rho = sum(p * (u @ rho @ u.conj().T) for p, u in units)
    ref = evolve_exact(terms.total, psi0, t).amplitudes
    return float(np.vdot(ref, rho @ ref).real)


def _select(probs, u):
    """Index ``j`` with ``cdf_{j-1} <= u < cdf_j`` per column; never a zero-probability index."""
    probs = np.asarray(probs, dtype=float)
    cdf = np.cumsum(probs, axis=0)
    u = np.asarray(u, dtype=float)
    if probs.ndim == 1 and u.ndim == 1:
        cdf = cdf[:, None]
    u = u * cdf[-1]
    j = np.sum(cdf <= u, axis=0)
    overflow = j >= probs.shape[0]
    if np.any(overflow):
        last = probs.shape[0] - 1 - np.argmax(probs[::-1] > 0, axis=0)
        j = np.where(overflow, last, j)
    return j


def sample_index(probs, rng):
    return int(_select(validate_probabilities(probs), rng.random()))


@dataclass
class StepRecord:
    step: int
    index: int
    tau: float
    probs: np.ndarray


@dataclass
class TrajectoryResult:
    final_state: StateVector
    fidelity: float
    step_log: list | None = None
    seed: int | None = None
    tau_max: float = 0.0
    n_clamped: int = 0


@dataclass
class BatchResult:
    fidelities: np.ndarray
    tau_max: float = 0.0
    n_clamped: int = 0
    final_states: np.ndarray | None = field(default=None, repr=False)
    step_log: list | None = None


def _shadow_plans(terms):
    if not terms.space.is_qubits:
        raise ValueError("shadow-estimated moments are only available for qubit models")
    return [MomentPlan(pauli_decompose(op)) for op in terms.operators]


def _shadow_probabilities(space, psi_cols, plans, strategy, rngs):
    """One shadow set per trajectory per step, shared by all terms."""
    cfg = strategy.shadows
    dev = np.zeros((len(plans), psi_cols.shape[1]))
    n_clamped = 0
    for b in range(psi_cols.shape[1]):
        shadow = sample_shadow(StateVector(space, psi_cols[:, b]), cfg.n_shots, rngs[b])
        for j, plan in enumerate(plans):
            d, var, _ = estimate_term_deviation(shadow, plan, cfg)
            n_clamped += var < NEGATIVE_VARIANCE_WARN
            dev[j, b] = d if var >= strategy.var_floor else 0.0
    return probabilities_from_deviations(dev), int(n_clamped)


def run_trajectories(terms, psi0, t, N, strategy, rngs, reference=None, record=False,
                     keep_states=False):
    """Simulate one trajectory per generator in ``rngs`` and return their fidelities."""
    if N < 0:
        raise ValueError("N must be >= 0")
    if psi0.space != terms.space:
        raise ValueError("initial state and terms live on different spaces")
    rngs = list(rngs)
    B = len(rngs)
    L = len(terms)
    eig = [op.eigh() for op in terms.operators]
    uniforms = np.stack([rng.random(N) for rng in rngs]) if B else np.zeros((0, N))
    psi = np.repeat(psi0.amplitudes[:, None], B, axis=1)
    if reference is None:
        reference = evolve_exact(terms.total, psi0, t)

    plans = None
    if strategy.adaptive:
        if strategy.shadows is not None:
            plans = _shadow_plans(terms)
    else:
        fixed = fixed_probabilities(terms, strategy)
        probs = np.repeat(fixed[:, None], B, axis=1)

    log_rows = [] if record else None
    tau_max = 0.0
    n_clamped = 0
    scale = t / N if N else 0.0
    for k in range(N):
        coeffs = None
        if strategy.adaptive:
            coeffs = [vh @ psi for _, _, vh in eig]
            if plans is None:
                means = np.empty((L, B))
                m2 = np.empty((L, B))
                for j, ((w, _, _), c) in enumerate(zip(eig, coeffs)):
                    pop = c.real**2 + c.imag**2
                    means[j] = w @ pop
                    m2[j] = (w * w) @ pop
                dev, c = deviations_from_moments(means, m2, strategy.var_floor)
                probs = probabilities_from_deviations(dev)
            else:
                probs, c = _shadow_probabilities(terms.space, psi, plans, strategy, rngs)
            n_clamped += c
        choice = _select(probs, uniforms[:, k])
        p_chosen = probs[choice, np.arange(B)]
        taus = scale / p_chosen
        if B:
            tau_max = max(tau_max, float(taus.max()))
        for j in range(L):
            cols = np.nonzero(choice == j)[0]
            if cols.size == 0:
                continue
            w, v, vh = eig[j]
            cj = coeffs[j][:, cols] if coeffs is not None else vh @ psi[:, cols]
            psi[:, cols] = v @ (np.exp(-1j * np.outer(w, taus[cols])) * cj)
        if record:
            for b in range(B):
                log_rows.append(StepRecord(k, int(choice[b]), float(taus[b]), probs[:, b].copy()))

    overlaps = reference.amplitudes.conj() @ psi
    fids = np.clip(overlaps.real**2 + overlaps.imag**2, 0.0, 1.0)
    return BatchResult(fids, tau_max, n_clamped, psi if keep_states else None, log_rows)


def run_trajectory(terms, psi0, t, N, strategy, rng, record=False, reference=None, seed=None):
    """One randomized-compilation trajectory of ``N`` steps to total time ``t``."""
    res = run_trajectories(terms, psi0, t, N, strategy, [rng], reference, record,
                           keep_states=True)
    final = StateVector.from_amplitudes(psi0.space, res.final_states[:, 0])
    return TrajectoryResult(final, float(res.fidelities[0]), res.step_log, seed,
                            res.tau_max, res.n_clamped)
