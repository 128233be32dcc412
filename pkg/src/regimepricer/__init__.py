"""Pricing engine for defaultable claims in regime-switching markets."""
from .barrier import BarrierSpec, phi_out, price_barrier
from .config import load_model, model_from_dict, three_regime_model
from .dirichlet import laplace_exact, laplace_taylor, taylor_remainder_bound
from .engines import (
    BarrierClaim,
    McConfig,
    McResult,
    OdeConfig,
    TerminalClaim,
    VulnerableOption,
    expm_price,
    mc_price,
    ode_price,
)
from .measure import TransformedParams, transform, transform_rate_only
from .model import (
    ConstantGenerator,
    RegimeModel,
    TimeVaryingGenerator,
    floor_zero_rates,
    validate_generator,
)
from .series import (
    PathCache,
    PricerConfig,
    PriceSurface,
    error_bound,
    phi,
    price_claim,
    truncated_series,
)
from .vulnoption import (
    LatticeConfig,
    OptionSpec,
    bs_kernel,
    first_order_vuln_price,
    vuln_option_price,
)

__version__ = "0.1.0"
