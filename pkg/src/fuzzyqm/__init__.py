"""Classical extensions and classical representations of finite-dimensional
quantum mechanics, with executable checks of measurement collapse as
Bayesian updating plus disturbance."""

__version__ = "0.1.0"

from .qcore import (
    DensityOperator,
    DiscretePOVM,
    Effect,
    KrausOperation,
    PureState,
    apply_operation,
    born_probability,
    haar_random_state,
    matrix_sqrt,
    polar_decompose,
    random_density,
)
from .cext import (
    ClassicalState,
    FuzzyObservable,
    classical_expectation,
    eigen_decomposition_state,
    induced_effect,
    joint_observable,
    random_decomposition,
    reduce,
    statistics_gap,
)
from .crep import (
    MinimalICPOVM,
    pseudo_distribution,
    random_ic_povm,
    reconstruct,
    representation_probabilities,
    sic_qubit,
)
from .update import (
    classical_bayes_update,
    extension_update,
    full_collapse_decomposition,
    representation_update,
)
from .experiments import CHSHScenario, chsh_value, singlet
