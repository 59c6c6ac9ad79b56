# %% [markdown]
# # Where the adaptive probabilities come from
#
# Each QDRIFT step picks term j with probability p_j and evolves it for
# tau_j = t / (N p_j). To second order the infidelity of one step is
# proportional to sum_j dH_j^2 / p_j - dH^2, where dH_j is the standard
# deviation of H_j in the current state. Minimizing over the simplex gives
# p_j proportional to dH_j.

# %%
import numpy as np

from adaptive_qdrift import (
    HermitianOperator,
    HilbertSpace,
    StateVector,
    cost_epsilon,
    deviations_from_moments,
    exact_moments,
    fluctuation_probabilities,
)
from adaptive_qdrift.models import HamiltonianTermSet, Term

rng = np.random.default_rng(1)
space = HilbertSpace.qubits(2)


def random_term(label):
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    return Term(label, HermitianOperator(space, (a + a.conj().T) / 2))


terms = HamiltonianTermSet(space, [random_term(c) for c in "abc"])
v = rng.normal(size=4) + 1j * rng.normal(size=4)
psi = StateVector(space, v / np.linalg.norm(v))

means, m2 = exact_moments(terms, psi)
dev, _ = deviations_from_moments(means, m2)
p = fluctuation_probabilities(means, m2)
print("deviations   ", np.round(dev, 4))
print("probabilities", np.round(p, 4))
print("cost at p    ", cost_epsilon(dev, p), " (sum dH)^2 =", dev.sum() ** 2)

# %% [markdown]
# No other point of the simplex does better.

# %%
others = rng.dirichlet(np.ones(3), size=5000)
costs = np.array([cost_epsilon(dev, q) for q in others])
print("best random point:", costs.min(), ">=", cost_epsilon(dev, p))

# %% [markdown]
# An eigenstate of a term has zero deviation for that term, so the term is
# never sampled. Its evolution would only contribute a global phase.

# %%
from adaptive_qdrift import PAULI_X, PAULI_Z

q1 = HilbertSpace((2,))
plus = StateVector.from_amplitudes(q1, [1, 1])
zx = HamiltonianTermSet(q1, [Term("z", HermitianOperator(q1, PAULI_Z)),
                             Term("x", HermitianOperator(q1, PAULI_X))])
print(fluctuation_probabilities(*exact_moments(zx, plus)))
