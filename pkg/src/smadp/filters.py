"""Adaptive filter update rules as pure per-sample step functions.

Every step takes the current weights (or :class:`AdpState`) and one
:class:`Sample` and returns the new state together with a
:class:`StepOutcome`.  Nothing is mutated in place.

All routines broadcast over leading batch dimensions: ``weights`` and
``sample.x`` may have shape ``(..., M)`` and ``sample.d`` shape ``(...)``.
The Monte-Carlo engine relies on this to advance many independent trials
with one call.  The ``*_kernel`` functions are the unchecked batched cores;
the public step functions add validation and raise on divergence.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .exceptions import ConfigError, DegenerateRegressorError, DivergenceError, DomainError
from .penalty import PenaltySpec, _gradient

logger = logging.getLogger(__name__)

DEFAULT_ALPHA_MAX = 1e-3
DEFAULT_DENOM_GUARD = 1e-12
# largest admissible adjustable step, as a multiple of the SM-NLMS step
MU_GUARD_FACTOR = 10.0


class AlphaMode(str, enum.Enum):
    POSTERIOR_GRADIENT = "posterior_gradient"
    POSTERIOR_ERROR = "posterior_error"
    FROZEN = "frozen"


class Sample(NamedTuple):
    """One data pair: regressor ``x`` (length M) and desired response ``d``."""

    x: np.ndarray
    d: float | np.ndarray


@dataclass(frozen=True)
class StepOutcome:
    """Diagnostics of one iteration.

    Scalars for a single filter, arrays for a batch.  ``guarded`` flags
    iterations where the adjustable step size fell back to the SM-NLMS step,
    in which case the a posteriori error is no longer pinned to the bound.
    """

    updated: bool | np.ndarray
    mu: float | np.ndarray
    rho: float | np.ndarray
    e_prior: float | np.ndarray
    e_post: float | np.ndarray
    alpha_next: float | np.ndarray
    guarded: bool | np.ndarray = False


@dataclass(frozen=True)
class PnlmsParams:
    mu: float = 0.5
    rho_prop: float = 0.01
    delta_p: float = 0.01
    delta_reg: float = 1e-8

    def __post_init__(self):
        for name in ("mu", "rho_prop", "delta_p", "delta_reg"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"PNLMS parameter {name} must be positive, got {v}")


@dataclass(frozen=True)
class AdpState:
    """State of a penalized set-membership filter.

    With ``alpha_mode='frozen'`` the regularization weight never changes and
    the filter is the fixed-penalty ZA/RZA/EZA-SM-NLMS baseline.
    """

    weights: np.ndarray
    alpha: float | np.ndarray
    penalty: PenaltySpec
    gamma: float
    alpha_max: float = DEFAULT_ALPHA_MAX
    alpha_mode: AlphaMode = AlphaMode.POSTERIOR_GRADIENT
    denom_guard: float = DEFAULT_DENOM_GUARD
    nonnegative_alpha: bool = False

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        try:
            object.__setattr__(self, "alpha_mode", AlphaMode(self.alpha_mode))
        except ValueError:
            raise ConfigError(f"unknown alpha_mode {self.alpha_mode!r}") from None
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not (np.isfinite(self.alpha_max) and self.alpha_max > 0):
            raise ConfigError(f"alpha_max must be positive, got {self.alpha_max}")
        if not self.denom_guard > 0:
            raise ConfigError("denom_guard must be positive")
        alpha = np.asarray(self.alpha, dtype=float)
        lo = 0.0 if self.nonnegative_alpha else -self.alpha_max
        if not np.all((alpha >= lo) & (alpha <= self.alpha_max)):
            raise ConfigError(f"alpha {self.alpha} outside [{lo}, {self.alpha_max}]")


def _scalar(v):
    v = np.asarray(v)
    return v.item() if v.ndim == 0 else v


def _check_sample(w, sample: Sample):
    w = np.asarray(w, dtype=float)
    x = np.asarray(sample.x, dtype=float)
    d = np.asarray(sample.d, dtype=float)
    if w.shape[-1:] != x.shape[-1:]:
        raise DomainError(f"weights have {w.shape[-1]} taps but regressor has {x.shape[-1]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(d))):
        raise DomainError("sample contains non-finite values")
    return w, x, d


def _check_finite(w):
    if not np.all(np.isfinite(w)):
        raise DivergenceError("adaptive filter weights became non-finite")


def _dot(a, b):
    return (a * b).sum(axis=-1)


def a_priori_error(weights, sample: Sample):
    """``d - w^T x`` using the weights before the current update."""
    w, x, d = _check_sample(weights, sample)
    return _scalar(d - _dot(w, x))


# -- step sizes and the regularization recursion -----------------------------


def sm_step_size(e, gamma, x_norm_sq):
    """SM-NLMS step size; zero whenever the error is within the bound.

    >>> sm_step_size(2.0, 1.0, 1.0)
    0.5
    """
    e, xn = np.asarray(e, dtype=float), np.asarray(x_norm_sq, dtype=float)
    ae = np.abs(e)
    upd = ae > gamma
    if np.any(upd & (xn <= 0)):
        raise DegenerateRegressorError("update requested with a zero-energy regressor")
    mu = np.where(upd, (1.0 - gamma / np.where(upd, ae, 1.0)) / np.where(upd, xn, 1.0), 0.0)
    return _scalar(mu)


def _adp_mu(e, gamma, xn, alpha, gx, denom_guard):
    ae = np.abs(e)
    # entries with |e| <= gamma are discarded by the callers
    shrink = 1.0 - gamma / np.where(ae > gamma, ae, 1.0)
    sm = shrink / np.where(xn > 0, xn, 1.0)
    den = e * xn - alpha * gx
    tiny = np.abs(den) < denom_guard
    raw = e * shrink / np.where(tiny, 1.0, den)
    # no attractor contribution: use the SM-NLMS expression bit for bit
    raw = np.where(alpha * gx == 0, sm, raw)
    guarded = tiny | (raw < 0) | (raw > MU_GUARD_FACTOR * sm)
    return np.where(guarded, sm, raw), guarded


def adp_step_size(e, gamma, x_norm_sq, alpha, grad_dot_x, denom_guard=DEFAULT_DENOM_GUARD):
    """Step size that pins the a posteriori error to the bound despite the
    zero-attractor term ``alpha * grad``.

    Falls back to :func:`sm_step_size` when the denominator nearly vanishes or
    the raw value is negative or more than ten times the SM-NLMS step.
    Returns 0 when ``|e| <= gamma``.
    """
    e = np.asarray(e, dtype=float)
    xn = np.asarray(x_norm_sq, dtype=float)
    upd = np.abs(e) > gamma
    if np.any(upd & (xn <= 0)):
        raise DegenerateRegressorError("update requested with a zero-energy regressor")
    mu, _ = _adp_mu(e, gamma, xn, np.asarray(alpha, dtype=float), np.asarray(grad_dot_x, dtype=float), denom_guard)
    return _scalar(np.where(upd, mu, 0.0))


def _alpha_next(e, gamma, mu, xn, gx, alpha_max, denom_guard, fallback, nonnegative):
    ae = np.abs(e)
    with np.errstate(over="ignore", invalid="ignore"):
        num = e * (gamma / np.where(ae > 0, ae, 1.0) + mu * xn - 1.0)
        den = mu * gx
        tiny = np.abs(den) < denom_guard
        a = np.where(tiny, fallback, num / np.where(tiny, 1.0, den))
    return np.clip(a, 0.0 if nonnegative else -alpha_max, alpha_max)


def alpha_update(
    e,
    gamma,
    mu,
    x_norm_sq,
    grad_dot_x,
    alpha_max=DEFAULT_ALPHA_MAX,
    denom_guard=DEFAULT_DENOM_GUARD,
    alpha=0.0,
    nonnegative=False,
):
    """Next regularization weight from the error-bound constraint.

    The result is clamped to ``[-alpha_max, alpha_max]`` (``[0, alpha_max]``
    when ``nonnegative``).  If ``|mu * grad_dot_x|`` is below ``denom_guard``
    the incoming ``alpha`` is returned unchanged.
    """
    a = _alpha_next(
        np.asarray(e, dtype=float),
        gamma,
        np.asarray(mu, dtype=float),
        np.asarray(x_norm_sq, dtype=float),
        np.asarray(grad_dot_x, dtype=float),
        alpha_max,
        denom_guard,
        np.asarray(alpha, dtype=float),
        nonnegative,
    )
    return _scalar(a)


# -- batched kernels (no validation, never raise) ----------------------------


class KernelResult(NamedTuple):
    weights: np.ndarray
    updated: np.ndarray
    mu: np.ndarray
    e: np.ndarray
    alpha: np.ndarray | None = None
    rho: np.ndarray | None = None
    guarded: np.ndarray | None = None


def sm_nlms_kernel(w, x, d, gamma) -> KernelResult:
    xn = _dot(x, x)
    e = d - _dot(w, x)
    ae = np.abs(e)
    upd = (ae > gamma) & (xn > 0)
    mu = np.where(upd, (1.0 - gamma / np.where(upd, ae, 1.0)) / np.where(upd, xn, 1.0), 0.0)
    w_new = np.where(upd[..., None], w + (mu * e)[..., None] * x, w)
    return KernelResult(w_new, upd, mu, e)


def oracle_kernel(w, x, d, gamma, mask) -> KernelResult:
    xm = x * mask
    xn = _dot(xm, xm)
    e = d - _dot(w, x)
    ae = np.abs(e)
    upd = (ae > gamma) & (xn > 0)
    mu = np.where(upd, (1.0 - gamma / np.where(upd, ae, 1.0)) / np.where(upd, xn, 1.0), 0.0)
    w_new = np.where(upd[..., None], w + (mu * e)[..., None] * xm, w)
    return KernelResult(w_new, upd, mu, e)


def nlms_kernel(w, x, d, mu_bar, delta_reg) -> KernelResult:
    e = d - _dot(w, x)
    mu = mu_bar / (_dot(x, x) + delta_reg)
    w_new = w + (mu * e)[..., None] * x
    return KernelResult(w_new, np.ones(np.shape(e), dtype=bool), mu, e)


def pnlms_gains(w, rho_prop, delta_p):
    """Proportionate per-tap gains, normalized to unit mean."""
    a = np.abs(w)
    floor = rho_prop * np.maximum(delta_p, a.max(axis=-1))
    g = np.maximum(floor[..., None], a)
    return g / g.mean(axis=-1, keepdims=True)


def pnlms_kernel(w, x, d, params: PnlmsParams) -> KernelResult:
    e = d - _dot(w, x)
    gx = pnlms_gains(w, params.rho_prop, params.delta_p) * x
    mu = params.mu / (_dot(x, gx) + params.delta_reg)
    w_new = w + (mu * e)[..., None] * gx
    return KernelResult(w_new, np.ones(np.shape(e), dtype=bool), mu, e)


def adp_kernel(
    w,
    alpha,
    x,
    d,
    penalty: PenaltySpec,
    gamma,
    alpha_max=DEFAULT_ALPHA_MAX,
    alpha_mode=AlphaMode.POSTERIOR_GRADIENT,
    denom_guard=DEFAULT_DENOM_GUARD,
    nonnegative_alpha=False,
) -> KernelResult:
    xn = _dot(x, x)
    e = d - _dot(w, x)
    upd = (np.abs(e) > gamma) & (xn > 0)
    p = _gradient(penalty, w)
    gx = _dot(p, x)
    mu, guarded = _adp_mu(e, gamma, xn, alpha, gx, denom_guard)
    mu = np.where(upd, mu, 0.0)
    guarded = guarded & upd
    rho = mu * alpha
    w_new = np.where(upd[..., None], w + (mu * e)[..., None] * x - rho[..., None] * p, w)

    if alpha_mode is AlphaMode.FROZEN:
        alpha_next = np.broadcast_to(alpha, np.shape(e))
    else:
        if alpha_mode is AlphaMode.POSTERIOR_GRADIENT:
            err, gxa = e, _dot(_gradient(penalty, w_new), x)
        else:
            err, gxa = d - _dot(w_new, x), gx
        a = _alpha_next(err, gamma, mu, xn, gxa, alpha_max, denom_guard, alpha, nonnegative_alpha)
        # an inactive attractor (gx == 0) leaves the constraint silent about alpha
        alpha_next = np.where(upd & (gx != 0), a, alpha)
    return KernelResult(w_new, upd, mu, e, alpha_next, rho, guarded)


# -- public step functions ---------------------------------------------------


def sm_nlms_step(weights, sample: Sample, gamma: float):
    """Set-membership NLMS: update only when ``|e| > gamma``, landing exactly
    on the bound."""
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    w, x, d = _check_sample(weights, sample)
    if np.any((np.abs(d - _dot(w, x)) > gamma) & (_dot(x, x) == 0)):
        raise DegenerateRegressorError("update requested with a zero-energy regressor")
    r = sm_nlms_kernel(w, x, d, gamma)
    _check_finite(r.weights)
    e_post = d - _dot(r.weights, x)
    return r.weights, StepOutcome(
        _scalar(r.updated), _scalar(r.mu), _scalar(np.zeros_like(r.mu)), _scalar(r.e), _scalar(e_post), 0.0
    )


def oracle_sm_nlms_step(weights, sample: Sample, gamma: float, support_mask):
    """SM-NLMS restricted to the taps flagged in ``support_mask``."""
    if not gamma > 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    w, x, d = _check_sample(weights, sample)
    mask = np.asarray(support_mask, dtype=bool)
    if mask.shape != w.shape[-1:]:
        raise DomainError(f"support mask has length {mask.size}, expected {w.shape[-1]}")
    r = oracle_kernel(w, x, d, gamma, mask)
    if np.any((np.abs(r.e) > gamma) & ~r.updated):
        logger.debug("oracle update skipped: no regressor energy on the support")
    _check_finite(r.weights)
    e_post = d - _dot(r.weights, x)
    return r.weights, StepOutcome(
        _scalar(r.updated), _scalar(r.mu), _scalar(np.zeros_like(r.mu)), _scalar(r.e), _scalar(e_post), 0.0
    )


def nlms_step(weights, sample: Sample, mu_bar: float = 0.5, delta_reg: float = 1e-8):
    """Normalized LMS with regularized normalization; always updates."""
    if not 0 < mu_bar <= 2:
        raise ConfigError(f"NLMS step must lie in (0, 2], got {mu_bar}")
    if delta_reg < 0:
        raise ConfigError("delta_reg must be non-negative")
    w, x, d = _check_sample(weights, sample)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = nlms_kernel(w, x, d, mu_bar, delta_reg)
    if delta_reg == 0:
        # 0/0 for a zero regressor means no update
        zero = _dot(x, x) == 0
        r = r._replace(weights=np.where(zero[..., None], w, r.weights), mu=np.where(zero, 0.0, r.mu))
    _check_finite(r.weights)
    e_post = d - _dot(r.weights, x)
    return r.weights, StepOutcome(
        _scalar(r.updated), _scalar(r.mu), _scalar(np.zeros_like(r.mu)), _scalar(r.e), _scalar(e_post), 0.0
    )


def pnlms_step(weights, sample: Sample, params: PnlmsParams = PnlmsParams()):
    """Proportionate NLMS: per-tap steps proportional to coefficient size."""
    w, x, d = _check_sample(weights, sample)
    r = pnlms_kernel(w, x, d, params)
    _check_finite(r.weights)
    e_post = d - _dot(r.weights, x)
    return r.weights, StepOutcome(
        _scalar(r.updated), _scalar(r.mu), _scalar(np.zeros_like(r.mu)), _scalar(r.e), _scalar(e_post), 0.0
    )


def adp_step(state: AdpState, sample: Sample):
    """One iteration of the penalized set-membership filter.

    On an update the weights move as ``w + mu e x - mu alpha grad(w)`` with
    ``mu`` chosen so that ``|e_post| = gamma``; the regularization weight is
    then refreshed according to ``state.alpha_mode``.
    """
    w, x, d = _check_sample(state.weights, sample)
    xn = _dot(x, x)
    if np.any((np.abs(d - _dot(w, x)) > state.gamma) & (xn == 0)):
        raise DegenerateRegressorError("update requested with a zero-energy regressor")
    r = adp_kernel(
        w,
        np.asarray(state.alpha, dtype=float),
        x,
        d,
        state.penalty,
        state.gamma,
        state.alpha_max,
        state.alpha_mode,
        state.denom_guard,
        state.nonnegative_alpha,
    )
    _check_finite(r.weights)
    e_post = d - _dot(r.weights, x)
    alpha_next = _scalar(np.array(r.alpha, copy=True))
    new_state = replace(state, weights=r.weights, alpha=alpha_next)
    outcome = StepOutcome(
        _scalar(r.updated), _scalar(r.mu), _scalar(r.rho), _scalar(r.e), _scalar(e_post), alpha_next, _scalar(r.guarded)
    )
    return new_state, outcome


# -- constructors ------------------------------------------------------------


def _make(penalty, gamma, alpha0, alpha_max, weights, taps, **kw):
    if alpha0 is None:
        alpha0 = alpha_max / 10
    if not alpha0 >= 0:
        raise ConfigError(f"alpha0 must be non-negative, got {alpha0}")
    if weights is None:
        weights = np.zeros(taps)
    return AdpState(np.asarray(weights, dtype=float), float(alpha0), penalty, gamma, alpha_max, **kw)


def make_za_adp(gamma, alpha0=None, alpha_max=DEFAULT_ALPHA_MAX, *, taps=64, weights=None, **kw) -> AdpState:
    """ZA-SM-NLMS-ADP: l1 zero attractor with adjustable weight."""
    return _make(PenaltySpec.l1(), gamma, alpha0, alpha_max, weights, taps, **kw)


def make_rza_adp(gamma, alpha0=None, alpha_max=DEFAULT_ALPHA_MAX, eps_prime=10.0, *, taps=64, weights=None, **kw):
    """RZA-SM-NLMS-ADP: reweighted (log-sum) zero attractor."""
    return _make(PenaltySpec.logsum(eps_prime), gamma, alpha0, alpha_max, weights, taps, **kw)


def make_eza_adp(gamma, alpha0=None, alpha_max=DEFAULT_ALPHA_MAX, beta=5.0, *, taps=64, weights=None, **kw):
    """EZA-SM-NLMS-ADP: exponential l0-approximation attractor."""
    return _make(PenaltySpec.expl0(beta), gamma, alpha0, alpha_max, weights, taps, **kw)
