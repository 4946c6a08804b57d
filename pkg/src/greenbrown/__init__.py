"""Two-class (green/brown) skew-normal factor model for credit portfolio losses."""

from .copula import LoanClassParams, PortfolioSpec, build_sigma, default_threshold, sample_returns
from .dist import (
    SkewNormalParams,
    norm_cdf,
    norm_pdf,
    norm_quantile,
    shape_from_loading,
    sn_cdf,
    sn_pdf,
    sn_quantile,
    sn_sample,
)
from .errors import BoundaryCaseError, DomainError, FitError, IngestionError, NonInvertibleError
from .exposure import (
    ExposureLaw,
    ExposureVector,
    fit_power_law,
    hhi,
    hhi_powerlaw_limit,
    make_weights,
    read_exposure_csv,
)
from .lhp import (
    LimitModel,
    conditional_loss,
    general_mix_cdf,
    invert_v,
    mix_cdf,
    mix_density,
    mix_loss,
    mix_var,
    single_class_density,
)
from .montecarlo import (
    LossSampleSummary,
    McConfig,
    conditional_loss_given_factors,
    convergence_experiment,
    empirical_quantile,
    simulate_losses,
    variance_decomposition_check,
)

LossDistribution = LimitModel

__version__ = "0.1.0"
