"""
besovlab: vector-valued Besov norms, Fourier multipliers and uniform
estimates for elliptic and convolution operator equations on grids.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BesovLabError,
    CheckFailure,
    ConfigError,
    DataError,
    DomainError,
    ExprSyntaxError,
    NumericError,
    SingularPencilError,
    UsageError,
)
from .grid import FREQUENCY, PHYSICAL, Field, Grid, forward_ft, inverse_ft, lq_norm, spectral_derivative  # noqa: E402
from .spaces import DiagOperator, Sector, SequenceSpace, frac_power, identity_operator  # noqa: E402
from .dyadic import DyadicSystem, TruncationWarning, phi_k  # noqa: E402
from .besov import (  # noqa: E402
    AnisoParams,
    BesovParams,
    aniso_norm,
    besov_block_norms,
    besov_norm_difference,
    besov_norm_fourier,
)
from .expr import Expr, parse_expr  # noqa: E402
from .symbols import Kernel, PolySymbolSpec, Symbol, hormander_constant, mikhlin_constant, mp_eta_constant  # noqa: E402
from .multipliers import ProbeEnsemble, apply_multiplier, estimate_besov_norm, estimate_Lq_norm  # noqa: E402
from .solvers import (  # noqa: E402
    ConvolutionFamily,
    ConvolutionProblem,
    EllipticFamily,
    EllipticProblem,
    InfiniteSystemProblem,
    solve_convolution,
    solve_elliptic,
    solve_infinite_system,
)
from .lab import (  # noqa: E402
    SweepPlan,
    SweepReport,
    coercive_sweep_convolution,
    coercive_sweep_elliptic,
    embedding_sweep,
    resolvent_sweep,
    semigroup_ray_check,
    system_sweep,
)
from .config import Config, format_config, parse_config  # noqa: E402

__all__ = [
    "__version__",
    "BesovLabError",
    "CheckFailure",
    "ConfigError",
    "DataError",
    "DomainError",
    "ExprSyntaxError",
    "NumericError",
    "SingularPencilError",
    "UsageError",
    "FREQUENCY",
    "PHYSICAL",
    "Field",
    "Grid",
    "forward_ft",
    "inverse_ft",
    "lq_norm",
    "spectral_derivative",
    "DiagOperator",
    "Sector",
    "SequenceSpace",
    "frac_power",
    "identity_operator",
    "DyadicSystem",
    "TruncationWarning",
    "phi_k",
    "AnisoParams",
    "BesovParams",
    "aniso_norm",
    "besov_block_norms",
    "besov_norm_difference",
    "besov_norm_fourier",
    "Expr",
    "parse_expr",
    "Kernel",
    "PolySymbolSpec",
    "Symbol",
    "hormander_constant",
    "mikhlin_constant",
    "mp_eta_constant",
    "ProbeEnsemble",
    "apply_multiplier",
    "estimate_besov_norm",
    "estimate_Lq_norm",
    "ConvolutionFamily",
    "ConvolutionProblem",
    "EllipticFamily",
    "EllipticProblem",
    "InfiniteSystemProblem",
    "solve_convolution",
    "solve_elliptic",
    "solve_infinite_system",
    "SweepPlan",
    "SweepReport",
    "coercive_sweep_convolution",
    "coercive_sweep_elliptic",
    "embedding_sweep",
    "resolvent_sweep",
    "semigroup_ray_check",
    "system_sweep",
    "Config",
    "format_config",
    "parse_config",
]
