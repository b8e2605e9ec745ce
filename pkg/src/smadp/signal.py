"""Synthetic system-identification world: FIR plants, excitation and noise.

All generators are pure functions of their arguments and an integer seed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .exceptions import ConfigError, DomainError

DEFAULT_TAPS = 64
DEFAULT_SPARSE_SUPPORT = (5, 21, 37, 53)

AR1_COEFFS = (0.7,)
AR4_COEFFS = (0.8, 0.19, 0.09, -0.5)


class SystemKind(str, enum.Enum):
    SPARSE = "sparse"
    SEMI_SPARSE = "semi_sparse"
    DENSE = "dense"


class InputKind(str, enum.Enum):
    WHITE = "white"
    AR1 = "ar1"
    AR4 = "ar4"


@dataclass(frozen=True)
class SystemSpec:
    """An unknown FIR plant.  ``support`` lists the indices of nonzero taps."""

    kind: SystemKind
    taps: np.ndarray = field(repr=False)
    support: tuple[int, ...] = ()

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "support", tuple(int(i) for i in np.flatnonzero(taps)))

    @property
    def mask(self) -> np.ndarray:
        return self.taps != 0


@dataclass(frozen=True)
class Phase:
    system: SystemSpec
    iterations: int


@dataclass(frozen=True)
class PhaseSchedule:
    """Consecutive plants; the plant switches abruptly between phases."""

    phases: tuple[Phase, ...]

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ConfigError("schedule needs at least one phase")
        for p in self.phases:
            if int(p.iterations) <= 0:
                raise ConfigError(f"phase iteration counts must be positive, got {p.iterations}")
        sizes = {p.system.taps.size for p in self.phases}
        if len(sizes) != 1:
            raise ConfigError("all phases must use plants with the same number of taps")

    @property
    def total(self) -> int:
        return sum(p.iterations for p in self.phases)

    @property
    def boundaries(self) -> list[int]:
        """Start iteration of each phase, followed by the total length."""
        return [0, *np.cumsum([p.iterations for p in self.phases]).tolist()]

    @property
    def taps(self) -> int:
        return self.phases[0].system.taps.size


@dataclass(frozen=True)
class InputModel:
    variant: InputKind = InputKind.WHITE
    input_power: float = 1.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", InputKind(self.variant))
        except ValueError:
            raise ConfigError(f"unknown input model {self.variant!r}") from None
        if not (np.isfinite(self.input_power) and self.input_power > 0):
            raise ConfigError(f"input_power must be positive, got {self.input_power}")

    @property
    def ar_coeffs(self) -> tuple[float, ...]:
        return {InputKind.WHITE: (), InputKind.AR1: AR1_COEFFS, InputKind.AR4: AR4_COEFFS}[self.variant]


@dataclass(frozen=True)
class NoiseModel:
    sigma_n: float = 0.04

    def __post_init__(self):
        if not (np.isfinite(self.sigma_n) and self.sigma_n > 0):
            raise ConfigError(f"sigma_n must be positive, got {self.sigma_n}")


def make_system(kind, seed: int, taps: int = DEFAULT_TAPS, support=None) -> SystemSpec:
    """Draw a unit-energy FIR plant of the requested sparsity.

    sparse
        nonzero only at ``support`` (default ``(5, 21, 37, 53)``)
    semi_sparse
        nonzero at the even indices ``0, 2, ..., taps - 2``
    dense
        every tap nonzero

    Nonzero values are unit Gaussian draws from ``seed``.
    """
    kind = SystemKind(kind)
    if kind is SystemKind.SPARSE:
        idx = np.asarray(DEFAULT_SPARSE_SUPPORT if support is None else support, dtype=int)
        if idx.size == 0 or np.any((idx < 0) | (idx >= taps)) or np.unique(idx).size != idx.size:
            raise ConfigError(f"invalid sparse support {list(idx)} for {taps} taps")
    elif kind is SystemKind.SEMI_SPARSE:
        idx = np.arange(0, taps, 2)
    else:
        idx = np.arange(taps)
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(idx.size)
    # a draw of exactly zero would silently shrink the support
    vals[vals == 0] = 1.0
    h = np.zeros(taps)
    h[np.sort(idx)] = vals
    return SystemSpec(kind, h / np.linalg.norm(h))


def ar_process(innovations, coeffs) -> np.ndarray:
    """Run ``x(i) = sum_k a_k x(i-k) + v(i)`` from zero initial conditions.

    Operates along the last axis.
    """
    a = np.concatenate([[1.0], -np.asarray(coeffs, dtype=float)])
    return lfilter([1.0], a, np.asarray(innovations, dtype=float), axis=-1)


def gen_input(model: InputModel, n: int, seed: int) -> np.ndarray:
    """Excitation sequence of length ``n``.

    White input is scaled to variance ``input_power``.  The AR inputs filter
    unit-variance white noise and are rescaled so the sample variance of the
    returned sequence equals ``input_power``.  Models sharing a seed share
    their driving noise.
    """
    if int(n) <= 0:
        raise ConfigError(f"sequence length must be positive, got {n}")
    v = np.random.default_rng(seed).standard_normal(int(n))
    return shape_input(model, v)


def shape_input(model: InputModel, v) -> np.ndarray:
    """Turn unit-variance white driving noise ``v`` into the modelled input."""
    v = np.asarray(v, dtype=float)
    if model.variant is InputKind.WHITE:
        return np.sqrt(model.input_power) * v
    x = ar_process(v, model.ar_coeffs)
    return x * np.sqrt(model.input_power / x.var(axis=-1, keepdims=True))


def regressor(x, i: int, taps: int) -> np.ndarray:
    """``[x(i), x(i-1), ..., x(i-taps+1)]`` with zeros before the first sample."""
    x = np.asarray(x, dtype=float)
    lo = max(0, i - taps + 1)
    win = x[..., lo : i + 1][..., ::-1]
    pad = taps - win.shape[-1]
    if pad:
        win = np.concatenate([win, np.zeros(win.shape[:-1] + (pad,))], axis=-1)
    return win


def gen_desired(system: SystemSpec, x_window, noise: NoiseModel, noise_sample) -> np.ndarray | float:
    """Noisy plant output ``taps^T x + sigma_n * noise_sample``."""
    x_window = np.asarray(x_window, dtype=float)
    if x_window.shape[-1] != system.taps.size:
        raise DomainError(f"regressor has {x_window.shape[-1]} samples, plant has {system.taps.size} taps")
    d = (system.taps * x_window).sum(axis=-1) + noise.sigma_n * np.asarray(noise_sample, dtype=float)
    return d.item() if np.ndim(d) == 0 else d
