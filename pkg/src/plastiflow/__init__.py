"""plastiflow: numerics for the heat law with sign-dependent time coefficient.

The equation b(du/dt) du/dt = Lap u with b piecewise constant in the sign
of du/dt is treated four ways that cross-validate each other: explicit
finite differences in optimal-control form, an obstacle-problem projection
of initial data, a dynamic-programming game on a space-time lattice with a
Monte Carlo twin, and large-time decay analysis against a family of exact
separable solutions.
"""

__version__ = "0.1.0"

from .grids import (  # noqa: F401
    Domain,
    GridFunction,
    Interval,
    Parameters,
    Rectangle,
    build_domain,
    build_interval,
    build_rectangle,
    gamma_form,
    harmonic_reduce,
    laplacian,
)
from .exact import (  # noqa: F401
    EigenPair,
    SeparableProfile,
    Tiling,
    decay_envelopes,
    eigenpair,
    heat_series_solve,
    profile_eigen_overlap,
    separable_profile,
    separable_solution,
)
from .obstacle import ObstacleResult, convex_envelope_1d, project_initial  # noqa: F401
from .evolve import (  # noqa: F401
    SchemeConfig,
    Solution,
    auto_config,
    ep_rhs,
    integrate,
    layer_rhs,
    limit_suite,
)
from .dpp import (  # noqa: F401
    DppTable,
    GameConfig,
    ball_average,
    dpp_alternate_solve,
    dpp_solve,
    mean_value_constant,
)
from .game import (  # noqa: F401
    ConstantB,
    EndpointBySign,
    TableGreedy,
    Trajectory,
    ValueEstimate,
    estimate_value,
    exit_stats,
    martingale_diagnostic,
    play,
    sample_ball,
)
from .asymptotics import (  # noqa: F401
    DecayFit,
    ThetaClassification,
    best_fit_constant,
    bisect_theta_star,
    classify_theta,
    decay_fit,
    projection,
)
