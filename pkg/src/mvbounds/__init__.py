"""Upper bounds on the systematic error of model-based quantum error mitigation caused by
inaccurate noise models, with Pauli-learning, model fitting and exact simulation tools."""

__version__ = "0.1.0"

from .pauli import (  # noqa: E402
    PauliString,
    PauliVector,
    density_to_pauli_coeffs,
    pauli_coeffs_to_density,
    wht_commutation,
)
from .channels import (  # noqa: E402
    PauliLindbladModel,
    PauliStochastishChannel,
    channel_from_model,
    diamond_distance_identity_exact,
    diamond_norm_exact,
    gamma,
    mitigated_map,
    model_fidelity,
    twirled_amplitude_damping,
)
from .learning import (  # noqa: E402
    LearningRecord,
    bootstrap,
    fit_decay,
    fit_model_nnls,
    ratio_sigma,
    synthesize_learning_data,
)
from .bounds import (  # noqa: E402
    BoundReport,
    LayerRatioData,
    bound_report,
    compare_models,
    delta_gamma,
    delta_two,
    pea_bound,
    tem_bound,
    worst_case_clifford,
)
from .simulation import LayeredCircuit, cpt_hessian, exact_expectation, mitigated_delta  # noqa: E402
from .experiments import ExperimentConfig, run_experiment  # noqa: E402
