"""Sparse support recovery: stepwise regression, relevance matching pursuit,
sparse Bayesian learning, recovery guarantees and benchmark experiments."""

from .errors import (
    BadArity,
    DataFormat,
    DuplicateIndex,
    InSpan,
    NotActive,
    NotDetermined,
    NotNormalized,
    NumericalFailure,
    RankDeficient,
    SparsePursuitError,
)
from .guarantees import (
    GuaranteeReport,
    babel,
    backward_noise_bound,
    backward_superset_bound,
    baseline_success_probability,
    coherence,
    erc,
    forward_noise_bound,
    forward_success_probability,
    guarantee_report,
    subset_selection_certificate,
)
from .linalg import (
    ActiveModel,
    Dictionary,
    add_column,
    energetic_norm,
    ls_solve,
    remove_column,
    residual_decrease,
    residual_increase,
)
from .sbl import SblState, fsbl, log_marginal_likelihood, optimal_gamma, rmp_sigma
from .stepwise import (
    SelectionPath,
    StopRule,
    backward_regression,
    foba,
    forward_regression,
    omp,
    rmp0,
)

__version__ = "0.1.0"
