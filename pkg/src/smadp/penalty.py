"""Sparsity-promoting penalty functions and their (sub)gradients.

Three penalties are supported, all separable over the coefficients:

==========  ==========================================  ====================================
variant     value                                       gradient (per coefficient)
==========  ==========================================  ====================================
``l1``      ``sum |w_m|``                               ``sign(w_m)``
``logsum``  ``sum log(1 + |w_m| / eps')``               ``sign(w_m) / (eps' + |w_m|)``
``expl0``   ``sum (1 - exp(-beta |w_m|))``              ``beta exp(-beta |w_m|) sign(w_m)``
==========  ==========================================  ====================================

``sign(0)`` is 0, so the zero vector is a fixed point of every zero attractor.
All functions broadcast over leading batch dimensions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DomainError

DEFAULT_EPS_PRIME = 10.0
DEFAULT_BETA = 5.0


class PenaltyKind(str, enum.Enum):
    L1 = "l1"
    LOGSUM = "logsum"
    EXPL0 = "expl0"


@dataclass(frozen=True)
class PenaltySpec:
    """Which penalty to apply, with its shape hyperparameters.

    ``epsilon_prime`` is only used by the log-sum penalty and ``beta`` only
    by the exponential l0 approximation; both must be positive regardless.
    """

    variant: PenaltyKind = PenaltyKind.L1
    epsilon_prime: float = DEFAULT_EPS_PRIME
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", PenaltyKind(self.variant))
        except ValueError:
            raise ConfigError(f"unknown penalty variant {self.variant!r}") from None
        if not (np.isfinite(self.epsilon_prime) and self.epsilon_prime > 0):
            raise ConfigError(f"epsilon_prime must be positive, got {self.epsilon_prime}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be positive, got {self.beta}")

    @classmethod
    def l1(cls) -> "PenaltySpec":
        return cls(PenaltyKind.L1)

    @classmethod
    def logsum(cls, epsilon_prime: float = DEFAULT_EPS_PRIME) -> "PenaltySpec":
        return cls(PenaltyKind.LOGSUM, epsilon_prime=epsilon_prime)

    @classmethod
    def expl0(cls, beta: float = DEFAULT_BETA) -> "PenaltySpec":
        return cls(PenaltyKind.EXPL0, beta=beta)


def _as_finite(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DomainError("penalty input contains non-finite components")
    return w


def penalty_value(spec: PenaltySpec, w) -> np.ndarray | float:
    """Evaluate the penalty, summing over the last axis.

    Returns a float for a single vector and an array for a batch.
    """
    w = _as_finite(w)
    a = np.abs(w)
    if spec.variant is PenaltyKind.L1:
        terms = a
    elif spec.variant is PenaltyKind.LOGSUM:
        terms = np.log1p(a / spec.epsilon_prime)
    else:
        terms = -np.expm1(-spec.beta * a)
    out = terms.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def penalty_gradient(spec: PenaltySpec, w) -> np.ndarray:
    """Elementwise (sub)gradient of :func:`penalty_value`, same shape as ``w``."""
    return _gradient(spec, _as_finite(w))


def _gradient(spec: PenaltySpec, w: np.ndarray) -> np.ndarray:
    # unchecked variant used inside the filter hot loop
    s = np.sign(w)
    if spec.variant is PenaltyKind.L1:
        return s
    if spec.variant is PenaltyKind.LOGSUM:
        return s / (spec.epsilon_prime + np.abs(w))
    return spec.beta * np.exp(-spec.beta * np.abs(w)) * s
