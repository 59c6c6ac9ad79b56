"""Randomized Hamiltonian simulation with fluctuation-guided adaptive sampling."""

__version__ = "0.1.0"

from .compiler import (  # noqa: E402
    EqualWeight,
    FixedQDrift,
    FluctuationAdaptive,
    channel_fidelity,
    cost_epsilon,
    deviations_from_moments,
    exact_channel_step,
    exact_moments,
    fixed_probabilities,
    fluctuation_probabilities,
    predicted_fidelity,
    run_trajectories,
    run_trajectory,
    sample_index,
)
from .hilbert import (  # noqa: E402
    PAULI_I,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    HermitianOperator,
    HilbertSpace,
    StateVector,
    apply_exp,
    evolve_exact,
    expectation,
    fidelity_pure,
    qfi,
    spectral_norm,
    standard_deviation,
    tensor_embed,
    variance,
)
from .models import (  # noqa: E402
    HamiltonianTermSet,
    KerrSpec,
    MFIMSpec,
    PauliString,
    RabiSpec,
    build_kerr,
    build_mfim,
    build_model,
    build_rabi,
    initial_state,
    pauli_decompose,
)
from .shadows import (  # noqa: E402
    EstimatorConfig,
    ShadowSet,
    estimate_pauli,
    estimate_term_moments,
    pauli_product,
    sample_shadow,
    sample_snapshot,
)
