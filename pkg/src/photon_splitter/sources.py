"""Photon sources: two-mode squeezed vacuum and heralded single photons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NeverClicks, DimensionMismatch
from .fock import DEFAULT_CUTOFF, DensityMatrix, PureState, as_density

# herald click probabilities below this are treated as "never"
_MIN_HERALD_PROBABILITY = 1e-15


@dataclass(frozen=True)
class HeraldedSourceSpec:
    """Down-conversion source: pair amplitude ``squeezing`` and herald efficiency."""

    squeezing: float = 0.1
    herald_efficiency: float = 1.0
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if not 0.0 <= self.squeezing < 1.0:
            raise DomainError(f"squeezing must lie in [0, 1), got {self.squeezing!r}")
        if not 0.0 <= self.herald_efficiency <= 1.0:
            raise DomainError(
                f"herald_efficiency must lie in [0, 1], got {self.herald_efficiency!r}"
            )


def two_mode_squeezed(spec):
    """Truncated, renormalized ``sum_n lambda^n |n, n>`` (signal = mode 0, idler = mode 1)."""
    if not 0.0 <= spec.squeezing < 1.0:
        raise DomainError(f"squeezing must lie in [0, 1), got {spec.squeezing!r}")
    d = spec.cutoff + 1
    tensor = np.zeros((d, d), dtype=complex)
    n = np.arange(d)
    tensor[n, n] = spec.squeezing ** n
    return PureState.from_amplitudes(tensor.ravel(), 2, spec.cutoff)


def no_click_weights(efficiency, cutoff):
    """Diagonal of the no-click POVM element ``sum_n (1 - eta)^n |n><n|``."""
    return (1.0 - efficiency) ** np.arange(cutoff + 1)


def herald(state, herald_efficiency):
    """Condition the signal (mode 0) on a click of a binary detector on the idler (mode 1).

    Returns the normalized conditional signal state and the click probability.
    """
    rho = as_density(state)
    if rho.num_modes != 2:
        raise DimensionMismatch("heralding needs a two-mode (signal, idler) state")
    if not 0.0 <= herald_efficiency <= 1.0:
        raise DomainError(f"herald_efficiency must lie in [0, 1], got {herald_efficiency!r}")
    d = rho.cutoff + 1
    click = 1.0 - no_click_weights(herald_efficiency, rho.cutoff)
    tensor = rho.elements.reshape(d, d, d, d)
    # Tr_idler[(1 (x) Pi_click) rho]; Pi_click is diagonal
    conditional = np.einsum("aibi,i->ab", tensor, click)
    probability = float(np.trace(conditional).real)
    if probability < _MIN_HERALD_PROBABILITY:
        raise NeverClicks(f"herald click probability {probability:.3g} is effectively zero")
    signal = DensityMatrix.from_matrix(conditional / probability, 1, rho.cutoff)
    return signal, min(probability, 1.0)


def heralded_photon(spec):
    """Conditional signal state and herald probability for a source spec."""
    return herald(two_mode_squeezed(spec), spec.herald_efficiency)
