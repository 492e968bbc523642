"""Two-dimensional quantum walk with a step-dependent coin.

The package evolves a four-component walker on the square lattice, measures
how localized it stays (support, return probability, Shannon and von Neumann
entropies, relative entropy against the step-independent walk) and estimates
localization lengths from the transfer matrix, both numerically and from the
perturbative closed form.
"""

from stepcoin.errors import (
    BandError,
    NotPSDError,
    PoleError,
    ResourceBudgetError,
    StepcoinError,
    ValidationError,
)
from stepcoin.walk import (
    CoinMatrix,
    CoinParams,
    InitialState,
    Mode,
    Wavefunction,
    apply_coin,
    apply_shift,
    coin_matrix,
    evolve,
    step,
    trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "BandError",
    "CoinMatrix",
    "CoinParams",
    "InitialState",
    "Mode",
    "NotPSDError",
    "PoleError",
    "ResourceBudgetError",
    "StepcoinError",
    "ValidationError",
    "Wavefunction",
    "apply_coin",
    "apply_shift",
    "coin_matrix",
    "evolve",
    "step",
    "trajectory",
]
