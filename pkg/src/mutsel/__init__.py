"""Selection-mutation model with house-of-cards mutations: simulation,
dominant eigenpair, asymptotic profiles and regime analysis."""
from .core import (
    Grid,
    Interval,
    Model,
    ModelParams,
    MutationKernel,
    PopulationState,
    build_grid,
    eval_kernel,
    integrate,
    make_model,
)
from .errors import (
    ConfigError,
    DegenerateProfile,
    InvalidArgument,
    MutselError,
    NoEigenvalue,
    NumericalFailure,
    OutOfDomain,
)
from .spectral import SpectralData, characteristic_F, expansion_prediction, solve_lambda, spectral_projection
from .profiles import eps0_exact, gamma1, gamma2, steady_state
from .simulator import StepperConfig, Trajectory, duhamel_residual, h_compose, linear_run, run, step

__version__ = "0.1.0"
