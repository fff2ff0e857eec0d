"""Single-hop on-off wireless networks under i.i.d. fading.

Threshold link activation, its threshold optimization, an exhaustive
throughput oracle and Monte Carlo checks of the tail bounds behind the
log n throughput scaling law.
"""

__version__ = "0.1.0"

from onoffnet.errors import (
    BracketError,
    ConfigurationError,
    DomainError,
    EmptyNetworkError,
    OnOffNetError,
    OutOfRegimeError,
    SizeGuardError,
    UnderflowError,
    UndefinedMeanError,
)
from onoffnet.fading import FadingSpec, SeedSpec, gain_ccdf, sample_gain_matrix
from onoffnet.netmodel import NetworkParams, ThroughputReport, throughput
from onoffnet.tblas import (
    SlackRule,
    ThresholdPolicy,
    ThresholdSolution,
    achievable_throughput,
    activate,
    optimize_threshold,
    solve_zero_order,
)
from onoffnet.oracle import OracleResult, max_throughput_exhaustive

__all__ = [
    "BracketError",
    "ConfigurationError",
    "DomainError",
    "EmptyNetworkError",
    "FadingSpec",
    "NetworkParams",
    "OnOffNetError",
    "OracleResult",
    "OutOfRegimeError",
    "SeedSpec",
    "SizeGuardError",
    "SlackRule",
    "ThresholdPolicy",
    "ThresholdSolution",
    "ThroughputReport",
    "UnderflowError",
    "UndefinedMeanError",
    "achievable_throughput",
    "activate",
    "gain_ccdf",
    "max_throughput_exhaustive",
    "optimize_threshold",
    "sample_gain_matrix",
    "solve_zero_order",
    "throughput",
]
