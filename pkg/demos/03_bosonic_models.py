# %% [markdown]
# # Kerr oscillator and Rabi model
#
# Bosonic terms are unbounded, so plain QDRIFT needs norms of the truncated
# matrices. With D = 50 the Kerr term's norm is 1176 and it swamps the
# other two. The adaptive rule only needs moments in the current state.

# %%
import numpy as np

from adaptive_qdrift import FixedQDrift, build_kerr, fixed_probabilities
from adaptive_qdrift.harness import config_from_dict, fit_result, sweep_stepsize, trace_probabilities
from adaptive_qdrift.models import KerrSpec

print("hard-truncation probabilities:", np.round(fixed_probabilities(build_kerr(KerrSpec()), FixedQDrift()), 4))

# %%
for strategy in ("hard-truncation", "equal", "adaptive"):
    cfg = config_from_dict({"model": {"kind": "kerr"}, "strategy": strategy, "n_samples": 300})
    res = sweep_stepsize(cfg)
    fit = fit_result(res)
    print(f"{strategy:16s}", np.round([r[1] for r in res.rows], 3), f"intercept {fit.intercept:.3f}")

# %% [markdown]
# The fidelity curves bend, so a linear intercept is only a rough summary
# for this model.
#
# In the Rabi model the adaptive probabilities follow the state. With strong
# coupling the most probable term changes during the run.

# %%
for g in (0.2, 0.8):
    cfg = config_from_dict({"model": {"kind": "rabi", "g": g}, "strategy": "adaptive", "n_steps": 50})
    rows = trace_probabilities(cfg).rows
    probs = np.array([r[3:] for r in rows])
    print(f"g = {g}: first {np.round(probs[0], 3)}, last {np.round(probs[-1], 3)}, "
          f"dominant terms {sorted(set(probs.argmax(axis=1).tolist()))}")
