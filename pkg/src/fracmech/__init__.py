"""Simulation toolkit for classical and fractional stochastic Hamiltonian
systems: power-law memory kernels, mechanical system builtins, explicit
stochastic Euler integration, and numerical verification of the underlying
variational structure."""

from .action import (
    CriticalityReport,
    PathVariation,
    action_differential,
    criticality_report,
    discrete_action,
    random_variation,
)
from .errors import (
    AlphaRangeError,
    ConfigError,
    DomainError,
    GridMismatchError,
    HyperregularityError,
    NumericAbortError,
    QuadratureError,
    SingularMetricError,
    SingularityError,
)
from .frackernel import (
    AlphaProfile,
    FracWeight,
    alpha_eval,
    digamma,
    frl_integral,
    frl_integral_report,
    g_weight,
    gamma,
    h_weight,
)
from .sde import (
    FORMULATIONS,
    SimConfig,
    Trajectory,
    WienerPath,
    euler_maruyama,
    ham_drift,
    hp_drift_classical,
    hp_drift_fractional,
    metric_velocity_drift,
    strong_error,
    wiener_path,
)
from .systems import (
    MetricModel,
    State,
    SystemModel,
    builtin_discounted,
    builtin_metric,
    builtin_natural,
    builtin_pendulum,
    builtin_samuelson,
    christoffel,
    finite_diff_partials,
    hamiltonian,
    invert_legendre,
    legendre_p,
)

__version__ = "0.1.0"
