"""Maximum-entropy (Boltzmann) prices for top-of-book data, imbalance-driven
price simulators, impact calculus and a micro-price estimator."""
from .core_prices import (
    Imbalance,
    TopOfBook,
    boltzmann_price,
    decomposition_approx,
    equilibrium_price,
    generalized_boltzmann_price,
    imbalance_from_book,
    mid_price,
    quasi_equilibrium_price,
    shannon_entropy,
    state_probabilities,
    weighted_mid_price,
)
from .dynamics import SamplingConfig, SimConfig, batch_run, simulate, simulate_paired
from .errors import (
    ConfigError,
    FitInfeasibleError,
    InfeasibleDriftError,
    InvalidInputError,
    MaxentLobError,
    MissingStateError,
    NumericFailureError,
    QuoteParseError,
    UndefinedStatisticError,
)
from .stochastics import DistributionSpec, RngSpec, SummaryStats

__version__ = "0.1.0"
