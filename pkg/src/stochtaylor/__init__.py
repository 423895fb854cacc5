"""Stochastic Taylor expansions: signatures, Chen-Strichartz coordinates, Castell
flows, small-time heat-kernel coefficients and the local Gauss-Bonnet identity."""
from .errors import (ConfigurationError, CostError, DomainError, IntegrationError,
                     QuadratureError, StochTaylorError, ValidationError)
from .lie import (LieSeries, bch_beta_explicit, bch_dynkin, bracket, expand_nested_bracket,
                  is_lie_element, lie_series_from_tensor)
from .signature import (PiecewiseLinearPath, chen_strichartz_coeffs, chen_strichartz_series,
                        iterated_integral_oracle, log_signature, path_signature, read_path)
from .tensor import TensorSeries, ts_exp, ts_log, ts_mul
from .words import descent_count, is_moment_word, word_degree, words_up_to

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "CostError", "DomainError", "IntegrationError", "QuadratureError",
    "StochTaylorError", "ValidationError",
    "LieSeries", "bch_beta_explicit", "bch_dynkin", "bracket", "expand_nested_bracket",
    "is_lie_element", "lie_series_from_tensor",
    "PiecewiseLinearPath", "chen_strichartz_coeffs", "chen_strichartz_series",
    "iterated_integral_oracle", "log_signature", "path_signature", "read_path",
    "TensorSeries", "ts_exp", "ts_log", "ts_mul",
    "descent_count", "is_moment_word", "word_degree", "words_up_to",
]
