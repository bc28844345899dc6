"""Drawdown and drawup stopping times of one-dimensional diffusions.

Submodules
----------
models        diffusion catalog, tabulated models, reflection
hitting       two-barrier hitting-time transform and scale function
drawdown      Laplace transforms of the drawdown-before-drawup event
brownian      closed forms and exact density series for drifted BM
inversion     fixed-Talbot Laplace inversion
montecarlo    seeded simulation oracle
applications  relative-drawdown options, misidentification probabilities
"""

from .brownian import (
    BmParams,
    DensitySeriesConfig,
    SeriesResult,
    bm_J0,
    bm_laplace_dd_larger,
    bm_laplace_ddu,
    bm_laplace_du_larger,
    bm_laplace_equal,
    density_dd_precedes,
    density_ddu,
    density_joint_sup_du,
    normal_pdf_deriv,
    s_lambda,
    t_lambda,
)
from .drawdown import (
    NumericsConfig,
    h_factor,
    laplace_dd_larger,
    laplace_dd_uncond,
    laplace_ddu,
    laplace_du_larger,
    laplace_equal,
    precede_probability,
)
from .errors import (
    DdlabError,
    DensityNotNormalized,
    EvaluatorFailed,
    NegativeIntegrand,
    NonFiniteCoefficient,
    NotSupported,
    NumericalError,
    QuadratureFailed,
    SeriesDiverged,
    SolveDiverged,
    StateLeftInterval,
    TruncationNotConverged,
    ValidationError,
)
from .hitting import HittingQuery, hitting_laplace, hitting_laplace_bm, scale_function
from .inversion import invert, invert_general
from .models import DiffusionModel, StateInterval, bm, cir, gbm, gbm_log, ou, read_table_csv, reflect, tabulated
from .montecarlo import (
    SimConfig,
    StoppingEnsemble,
    StoppingRecord,
    estimate_finite_horizon,
    estimate_frequency,
    estimate_laplace,
    simulate,
    verify_range_identity,
)
from .applications import (
    PricingSpec,
    RelativeEventSpec,
    SignalSpec,
    StartDensity,
    misid_aggregate,
    misid_deterministic,
    misid_exponential,
    price_finite,
    price_perpetual,
    read_start_density,
    relative_to_log,
)

__version__ = "0.1.0"
