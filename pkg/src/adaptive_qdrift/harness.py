"""
Seeded Monte-Carlo experiments, sweeps and result emission.

Every trajectory gets its own generator,
``SeedSequence(master_seed, spawn_key=(point, index))``, where ``point``
numbers the sweep point and ``index`` the trajectory. Trajectories run in
fixed-size chunks by index and the chunk results are joined in index
order. The emitted bytes therefore depend only on the config and the
master seed, not on ``jobs``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from . import __version__
from .compiler import (
    EqualWeight,
    FixedQDrift,
    FluctuationAdaptive,
    run_trajectories,
    run_trajectory,
)
from .hilbert import evolve_exact, expectation, standard_deviation
from .models import (
    KerrSpec,
    MFIMSpec,
    RabiSpec,
    build_model,
    initial_state,
    pauli_decompose,
)
from .shadows import EstimatorConfig, MomentPlan, estimate_term_deviation, sample_shadow

log = logging.getLogger(__name__)

CHUNK = 256
DEFAULT_BUDGET = 5e10
SWEEP_COLUMNS = [
    "abscissa", "mean_fidelity", "std_error", "n_samples", "strategy", "model_tag", "seed",
    "n_steps", "t",
]


class ConfigError(ValueError):
    """The run configuration is invalid."""


class ResourceGuardError(RuntimeError):
    """A run would exceed the configured work budget."""


# -- configuration ------------------------------------------------------------

_MODEL_KINDS = {"mfim": MFIMSpec, "kerr": KerrSpec, "rabi": RabiSpec}
_STRATEGY_KINDS = ("adaptive", "qdrift", "hard-truncation", "equal")


@dataclass(frozen=True)
class ShadowBenchConfig:
    n_shots: int = 50_000
    mom_batches: int = 10
    floor_sigmas: float = 3.0
    scaling_shots: tuple = (500, 1000, 2000, 4000, 8000)
    repeats: int = 100


@dataclass(frozen=True)
class RunConfig:
    model: object
    strategy: object
    strategy_label: str
    t: float = 1.0
    n_steps: int = 50
    step_size: float = 0.02
    sweep_n_steps: tuple = (10, 20, 30, 40, 50)
    sweep_step_sizes: tuple = (0.01, 0.02, 0.03, 0.04, 0.05)
    n_samples: int = 10_000
    master_seed: int = 0
    record_traces: bool = False
    budget: float = DEFAULT_BUDGET
    bench: ShadowBenchConfig = field(default_factory=ShadowBenchConfig)

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError("t must be > 0")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not self.step_size > 0 or any(s <= 0 for s in self.sweep_step_sizes):
            raise ConfigError("step sizes must be > 0")
        if any(n < 1 for n in self.sweep_n_steps):
            raise ConfigError("sweep_n_steps entries must be >= 1")

    def replace(self, **changes):
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return RunConfig(**values)

    def echo(self):
        """Plain-data view of the full configuration, defaults included."""
        out = {
            "model": {"kind": self.model.tag, **_spec_dict(self.model)},
            "strategy": _strategy_dict(self.strategy_label, self.strategy),
        }
        for f in fields(self):
            if f.name in ("model", "strategy", "strategy_label"):
                continue
            v = getattr(self, f.name)
            out[f.name] = asdict(v) if f.name == "bench" else v
        return _plain(out)


def _spec_dict(spec):
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def _strategy_dict(label, strategy):
    out = {"kind": label}
    if isinstance(strategy, FluctuationAdaptive):
        out["var_floor"] = strategy.var_floor
        out["moments"] = "exact" if strategy.shadows is None else "shadows"
        if strategy.shadows is not None:
            out["shadows"] = asdict(strategy.shadows)
    return out


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def _parse_initial(raw):
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append(tuple(int(c) for c in item))
        elif isinstance(item, int):
            out.append((item,))
        else:
            out.append(tuple(int(c) for c in item))
    return tuple(out)


def parse_model(raw):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise ConfigError("model section needs a 'kind' (mfim, kerr or rabi)")
    raw = dict(raw)
    kind = raw.pop("kind")
    if kind not in _MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}")
    if "initial_state" in raw:
        raw["initial"] = _parse_initial(raw.pop("initial_state"))
    try:
        return _MODEL_KINDS[kind](**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} model: {exc}") from exc


def parse_strategy(raw):
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict) or raw.get("kind") not in _STRATEGY_KINDS:
        raise ConfigError(f"strategy kind must be one of {_STRATEGY_KINDS}")
    kind = raw["kind"]
    if kind in ("qdrift", "hard-truncation"):
        return kind, FixedQDrift()
    if kind == "equal":
        return kind, EqualWeight()
    moments = raw.get("moments", "exact")
    if moments not in ("exact", "shadows"):
        raise ConfigError("strategy.moments must be 'exact' or 'shadows'")
    try:
        shadows = EstimatorConfig(**raw.get("shadows", {})) if moments == "shadows" else None
        return kind, FluctuationAdaptive(float(raw.get("var_floor", 1e-12)), shadows)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid strategy: {exc}") from exc


def config_from_dict(raw):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    raw = dict(raw)
    for key in ("model", "strategy"):
        if key not in raw:
            raise ConfigError(f"config is missing required section {key!r}")
    model = parse_model(raw.pop("model"))
    label, strategy = parse_strategy(raw.pop("strategy"))
    if "bench" in raw:
        try:
            b = dict(raw.pop("bench"))
            if "scaling_shots" in b:
                b["scaling_shots"] = tuple(b["scaling_shots"])
            raw["bench"] = ShadowBenchConfig(**b)
        except TypeError as exc:
            raise ConfigError(f"invalid bench section: {exc}") from exc
    for key in ("sweep_n_steps", "sweep_step_sizes"):
        if key in raw:
            raw[key] = tuple(raw[key])
    try:
        return RunConfig(model=model, strategy=strategy, strategy_label=label, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    """Read a YAML run configuration."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return config_from_dict(raw)


def build(config):
    """Term set and initial state for a config; bosonic weights only when QDRIFT needs them."""
    weighted = not isinstance(config.strategy, EqualWeight)
    terms = build_model(config.model, truncation_weights=weighted).prepare()
    return terms, initial_state(config.model)


# -- results ------------------------------------------------------------------


@dataclass
class ExperimentResult:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)


def _metadata(config, command, **extra):
    meta = {
        "version": f"adaptive_qdrift {__version__}",
        "command": command,
        "master_seed": config.master_seed,
        "config": config.echo(),
        "factor_order": _factor_order(config.model),
    }
    meta.update(extra)
    return _plain(meta)


def _factor_order(spec):
    if isinstance(spec, RabiSpec):
        return "boson, qubit (index = 2 n + s)"
    if isinstance(spec, MFIMSpec):
        return "qubit 0 most significant"
    return "single boson mode"


# -- Monte Carlo --------------------------------------------------------------


def trajectory_rng(master_seed, point, index):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(point, index)))


def _run_chunk(args):
    terms, psi0, t, N, strategy, reference, master_seed, point, start, stop = args
    rngs = [trajectory_rng(master_seed, point, i) for i in range(start, stop)]
    res = run_trajectories(terms, psi0, t, N, strategy, rngs, reference=reference)
    return res.fidelities, res.tau_max, res.n_clamped


def _check_budget(terms, N, n_samples, budget):
    work = float(terms.space.total_dim) ** 2 * N * n_samples
    if work > budget:
        raise ResourceGuardError(
            f"dim^2 * N * n_samples = {work:.3e} exceeds the budget {budget:.3e}"
        )


def monte_carlo_fidelity(terms, psi0, t, N, strategy, n_samples, master_seed=0, point=0,
                         jobs=1, budget=DEFAULT_BUDGET):
    """Mean and standard error of the trajectory fidelity at one ``(t, N)`` point."""
    _check_budget(terms, N, n_samples, budget)
    reference = evolve_exact(terms.total, psi0, t)
    tasks = [
        (terms, psi0, t, N, strategy, reference, master_seed, point, s, min(s + CHUNK, n_samples))
        for s in range(0, n_samples, CHUNK)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(task) for task in tasks]
    fids = np.concatenate([p[0] for p in parts])
    mean = float(np.mean(fids))
    if n_samples > 1:
        se = float(np.std(fids, ddof=1) / math.sqrt(n_samples))
    else:
        log.warning("n_samples=1: standard error reported as 0 (degenerate sample)")
        se = 0.0
    n_clamped = sum(p[2] for p in parts)
    if n_clamped:
        log.warning("clamped %d negative variance estimate(s) to zero", n_clamped)
    return {
        "mean_fidelity": min(max(mean, 0.0), 1.0),
        "std_error": se,
        "n_samples": n_samples,
        "degenerate": n_samples == 1,
        "tau_max": max(p[1] for p in parts),
        "n_clamped": n_clamped,
    }


def _point_row(config, abscissa, stats, N, t):
    return [abscissa, stats["mean_fidelity"], stats["std_error"], stats["n_samples"],
            config.strategy_label, config.model.tag, config.master_seed, N, t]


def _sweep(config, command, points, jobs):
    terms, psi0 = build(config)
    rows, tau_max, clamped, degenerate = [], 0.0, 0, False
    for k, (abscissa, N, t) in enumerate(points):
        stats = monte_carlo_fidelity(terms, psi0, t, N, config.strategy, config.n_samples,
                                     config.master_seed, k, jobs, config.budget)
        rows.append(_point_row(config, abscissa, stats, N, t))
        tau_max = max(tau_max, stats["tau_max"])
        clamped += stats["n_clamped"]
        degenerate |= stats["degenerate"]
    meta = _metadata(config, command, tau_max=tau_max, n_clamped=clamped,
                     degenerate_samples=degenerate, term_labels=terms.labels)
    return ExperimentResult(list(SWEEP_COLUMNS), rows, meta)


def run_point(config, jobs=1):
    """Single ``(t, n_steps)`` point."""
    return _sweep(config, "run", [(config.n_steps, config.n_steps, config.t)], jobs)


def sweep_steps(config, jobs=1):
    """Vary the step count at a fixed step size; ``t = step_size * N``."""
    points = [(N, N, config.step_size * N) for N in sorted(set(config.sweep_n_steps))]
    return _sweep(config, "sweep-steps", points, jobs)


def steps_for(t, step):
    return max(1, int(round(t / step)))


def sweep_stepsize(config, jobs=1):
    """Vary the step size at fixed ``t``; ``N = round(t / step)`` is recorded per row."""
    points = [(s, steps_for(config.t, s), config.t) for s in sorted(set(config.sweep_step_sizes))]
    return _sweep(config, "sweep-stepsize", points, jobs)


@dataclass(frozen=True)
class LineFit:
    intercept: float
    slope: float
    intercept_se: float


def extrapolate_zero_step(records):
    """Least-squares line through ``(step, fidelity)`` pairs; the intercept is the zero-step limit."""
    pts = np.asarray(records, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if len(x) < 2 or np.ptp(x) == 0:
        raise ValueError("need at least two distinct step sizes to extrapolate")
    A = np.column_stack([np.ones_like(x), x])
    (b0, b1), *_ = np.linalg.lstsq(A, y, rcond=None)
    dof = len(x) - 2
    if dof > 0:
        resid = y - A @ np.array([b0, b1])
        s2 = float(resid @ resid) / dof
        sxx = float(np.sum((x - x.mean()) ** 2))
        se = math.sqrt(s2 * (1.0 / len(x) + x.mean() ** 2 / sxx))
    else:
        se = float("nan")
    return LineFit(float(b0), float(b1), se)


def fit_result(result):
    """Zero-step fit over a sweep-stepsize result."""
    i, j = result.columns.index("abscissa"), result.columns.index("mean_fidelity")
    return extrapolate_zero_step([(r[i], r[j]) for r in result.rows])


def trace_probabilities(config):
    """Per-step sampling probabilities of one seeded adaptive trajectory."""
    if not isinstance(config.strategy, FluctuationAdaptive):
        raise ConfigError("probability traces need the adaptive strategy; fixed ones are constant")
    terms, psi0 = build(config)
    res = run_trajectory(terms, psi0, config.t, config.n_steps, config.strategy,
                         trajectory_rng(config.master_seed, 0, 0), record=True)
    columns = ["step", "tau", "sampled_index"] + [f"p_{j + 1}" for j in range(len(terms))]
    rows = [[r.step, r.tau, r.index, *map(float, r.probs)] for r in res.step_log]
    meta = _metadata(config, "trace-probs", fidelity=res.fidelity, tau_max=res.tau_max,
                     term_labels=terms.labels)
    return ExperimentResult(columns, rows, meta)


def shadow_bench(config):
    """Calibrate shadow-estimated deviations against the exact state values.

    One large shadow set gives the per-term deviation estimates; repeated
    smaller sets give the standard error of each term mean per shot count and
    its log-log slope against the shot count.
    """
    if not isinstance(config.model, MFIMSpec):
        raise ConfigError("shadow-bench needs a qubit (mfim) model")
    bench = config.bench
    try:
        est_cfg = EstimatorConfig(bench.n_shots, bench.mom_batches, bench.floor_sigmas)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    terms, psi0 = build(config)
    plans = [MomentPlan(pauli_decompose(op)) for op in terms.operators]
    shadow = sample_shadow(psi0, bench.n_shots, trajectory_rng(config.master_seed, 0, 0))

    shots = np.array(sorted(set(bench.scaling_shots)), dtype=float)
    spread = np.zeros((len(plans), len(shots)))
    for k, n in enumerate(shots.astype(int)):
        reps = np.array([
            [plan.estimate(sample_shadow(psi0, n, trajectory_rng(config.master_seed, k + 1, r)))[0]
             for plan in plans]
            for r in range(bench.repeats)
        ])
        spread[:, k] = reps.std(axis=0, ddof=1)

    columns = ["term", "exact_mean", "exact_deviation", "estimated_mean",
               "estimated_deviation", "variance_se", "relative_error", "scaling_slope"]
    rows = []
    for j, (term, plan) in enumerate(zip(terms, plans)):
        exact_dev = standard_deviation(term.operator, psi0)
        mean, _, _ = plan.estimate(shadow, est_cfg)
        dev, _, se = estimate_term_deviation(shadow, plan, est_cfg)
        rel = _relative_error(dev, exact_dev)
        slope = float(np.polyfit(np.log(shots), np.log(spread[j]), 1)[0]) if len(shots) > 1 else float("nan")
        rows.append([term.label, expectation(term.operator, psi0), exact_dev, mean, dev, se,
                     rel, slope])
    meta = _metadata(config, "shadow-bench", scaling_shots=shots.astype(int).tolist(),
                     scaling_std=spread.tolist(), term_labels=terms.labels)
    return ExperimentResult(columns, rows, meta)


def _relative_error(estimate, exact):
    if exact > 0:
        return abs(estimate - exact) / exact
    return 0.0 if estimate == 0 else math.inf


# -- emission -----------------------------------------------------------------


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_json_safe(v) for v in x]
    return _json_value(_plain(x))


def render(result, fmt):
    """Serialize a result to text; same result, same bytes."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in _plain(row)])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "metadata": result.metadata,
            "columns": result.columns,
            "rows": [dict(zip(result.columns, row)) for row in result.rows],
        }
        return json.dumps(_json_safe(doc), indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(result, fmt, path):
    """Write ``result`` as CSV or JSON.

    CSV output is the header row plus one line per record. The metadata
    block (seed, config echo, version) goes next to it as ``<path>.meta.json``.
    """
    text = render(result, fmt)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
        if fmt == "csv":
            with open(f"{path}.meta.json", "w") as fh:
                fh.write(json.dumps(_json_safe(result.metadata), indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path
