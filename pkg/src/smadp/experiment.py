"""Monte-Carlo system-identification experiments.

Seeding
-------
Every random stream is derived from ``master_seed`` with the SplitMix64
finalizer, so a trial's data depend only on ``(master_seed, trial_index)``
and never on how many trials run or in which order::

    mix64(a, b)     = splitmix64(splitmix64(a) ^ b)      (all mod 2**64)
    trial_seed      = mix64(master_seed, trial_index)
    driving noise v = default_rng([trial_seed, 0]).standard_normal(N)
    measurement     = default_rng([trial_seed, 1]).standard_normal(N)
    plant k         = make_system(kind_k, mix64(master_seed, 2**32 + k))
                      or, with redraw_per_trial,
                      make_system(kind_k, mix64(trial_seed, 2**32 + k))

``splitmix64(z)`` is the usual finalizer: ``z += 0x9E3779B97F4A7C15``,
then ``z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9``,
``z = (z ^ z >> 27) * 0x94D049BB133111EB``, ``z ^ z >> 31``.

All algorithms and all input models of a trial share the same driving
noise, measurement noise and plants, so comparisons are paired.
Trials are simulated in fixed-size chunks, vectorized across the chunk;
per-iteration averages are accumulated chunk by chunk in trial order.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import filters
from .exceptions import ConfigError, ExperimentError
from .filters import AlphaMode, PnlmsParams
from .penalty import PenaltySpec
from .signal import (
    DEFAULT_SPARSE_SUPPORT,
    InputModel,
    NoiseModel,
    Phase,
    PhaseSchedule,
    make_system,
    shape_input,
)

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
PLANT_STREAM = 1 << 32
CHUNK_SIZE = 100
STEADY_FRACTION = 0.2


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64(a: int, b: int) -> int:
    return splitmix64(splitmix64(a & MASK64) ^ (b & MASK64))


def trial_seed(master_seed: int, trial_index: int) -> int:
    return mix64(master_seed, trial_index)


def plant_seed(seed: int, phase_index: int) -> int:
    return mix64(seed, PLANT_STREAM + phase_index)


# -- algorithm descriptors ---------------------------------------------------


class AlgoKind(str, enum.Enum):
    NLMS = "nlms"
    PNLMS = "pnlms"
    SM_NLMS = "sm_nlms"
    ORACLE_SM_NLMS = "oracle_sm_nlms"
    ZA_SM_NLMS = "za_sm_nlms"
    RZA_SM_NLMS = "rza_sm_nlms"
    EZA_SM_NLMS = "eza_sm_nlms"
    ZA_SM_NLMS_ADP = "za_sm_nlms_adp"
    RZA_SM_NLMS_ADP = "rza_sm_nlms_adp"
    EZA_SM_NLMS_ADP = "eza_sm_nlms_adp"


LABELS = {
    AlgoKind.NLMS: "NLMS",
    AlgoKind.PNLMS: "PNLMS",
    AlgoKind.SM_NLMS: "SM-NLMS",
    AlgoKind.ORACLE_SM_NLMS: "Oracle SM-NLMS",
    AlgoKind.ZA_SM_NLMS: "ZA-SM-NLMS",
    AlgoKind.RZA_SM_NLMS: "RZA-SM-NLMS",
    AlgoKind.EZA_SM_NLMS: "EZA-SM-NLMS",
    AlgoKind.ZA_SM_NLMS_ADP: "ZA-SM-NLMS-ADP",
    AlgoKind.RZA_SM_NLMS_ADP: "RZA-SM-NLMS-ADP",
    AlgoKind.EZA_SM_NLMS_ADP: "EZA-SM-NLMS-ADP",
}

_PENALIZED = {
    AlgoKind.ZA_SM_NLMS: "l1",
    AlgoKind.RZA_SM_NLMS: "logsum",
    AlgoKind.EZA_SM_NLMS: "expl0",
    AlgoKind.ZA_SM_NLMS_ADP: "l1",
    AlgoKind.RZA_SM_NLMS_ADP: "logsum",
    AlgoKind.EZA_SM_NLMS_ADP: "expl0",
}

_COMMON_PENALTY = {"alpha0": None, "alpha_max": 1e-3, "denom_guard": 1e-12, "nonnegative_alpha": False}

# accepted hyperparameters and their defaults (None: derived at build time)
PARAM_DEFAULTS: dict[AlgoKind, dict] = {
    AlgoKind.NLMS: {"mu": 0.5, "delta_reg": 1e-8},
    AlgoKind.PNLMS: {"mu": 0.5, "rho_prop": 0.01, "delta_p": 0.01, "delta_reg": 1e-8},
    AlgoKind.SM_NLMS: {},
    AlgoKind.ORACLE_SM_NLMS: {},
}
for _k, _pen in _PENALIZED.items():
    _d = dict(_COMMON_PENALTY)
    if _pen == "logsum":
        _d["eps_prime"] = 10.0
    if _pen == "expl0":
        _d["beta"] = 5.0
    if _k.value.endswith("_adp"):
        _d["alpha_mode"] = AlphaMode.POSTERIOR_GRADIENT.value
    PARAM_DEFAULTS[_k] = _d


@dataclass(frozen=True)
class AlgorithmSpec:
    """Which algorithm to run and with which hyperparameters."""

    kind: AlgoKind
    params: Mapping = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        try:
            kind = AlgoKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown algorithm {self.kind!r}; choose from {[k.value for k in AlgoKind]}") from None
        object.__setattr__(self, "kind", kind)
        allowed = PARAM_DEFAULTS[kind]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ConfigError(f"{kind.value} does not accept parameter(s) {sorted(unknown)}")
        merged = {**allowed, **self.params}
        if kind in _PENALIZED and merged["alpha0"] is None:
            merged["alpha0"] = merged["alpha_max"] / 10
        object.__setattr__(self, "params", merged)
        if not self.label:
            object.__setattr__(self, "label", LABELS[kind])
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind is AlgoKind.NLMS:
            if not 0 < p["mu"] <= 2:
                raise ConfigError(f"NLMS step must lie in (0, 2], got {p['mu']}")
            if p["delta_reg"] < 0:
                raise ConfigError("delta_reg must be non-negative")
        elif self.kind is AlgoKind.PNLMS:
            PnlmsParams(**p)
        elif self.kind in _PENALIZED:
            self.penalty()
            if not p["alpha_max"] > 0:
                raise ConfigError(f"alpha_max must be positive, got {p['alpha_max']}")
            if not 0 <= p["alpha0"] <= p["alpha_max"]:
                raise ConfigError(f"alpha0 must lie in [0, alpha_max], got {p['alpha0']}")
            if not p["denom_guard"] > 0:
                raise ConfigError("denom_guard must be positive")
            if "alpha_mode" in p:
                try:
                    AlphaMode(p["alpha_mode"])
                except ValueError:
                    raise ConfigError(f"unknown alpha_mode {p['alpha_mode']!r}") from None

    def penalty(self) -> PenaltySpec:
        pen = _PENALIZED[self.kind]
        if pen == "l1":
            return PenaltySpec.l1()
        if pen == "logsum":
            return PenaltySpec.logsum(self.params["eps_prime"])
        return PenaltySpec.expl0(self.params["beta"])

    @property
    def alpha_mode(self) -> AlphaMode:
        return AlphaMode(self.params.get("alpha_mode", AlphaMode.FROZEN))

    @property
    def is_set_membership(self) -> bool:
        return self.kind not in (AlgoKind.NLMS, AlgoKind.PNLMS)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "label": self.label, "params": dict(self.params)}


class _Runner:
    """Batched filter state for one algorithm within one chunk of trials."""

    def __init__(self, spec: AlgorithmSpec, gamma: float, batch: int, taps: int):
        self.spec = spec
        self.gamma = gamma
        self.w = np.zeros((batch, taps))
        self.alpha = None
        self._mask = None
        p = spec.params
        kind = spec.kind
        if kind is AlgoKind.PNLMS:
            self._pnlms = PnlmsParams(**p)
        if kind in _PENALIZED:
            self.alpha = np.full(batch, float(p["alpha0"]))
            self._penalty = spec.penalty()
            self._mode = spec.alpha_mode

    def step(self, x, d, mask):
        kind = self.spec.kind
        if kind is AlgoKind.NLMS:
            r = filters.nlms_kernel(self.w, x, d, self.spec.params["mu"], self.spec.params["delta_reg"])
        elif kind is AlgoKind.PNLMS:
            r = filters.pnlms_kernel(self.w, x, d, self._pnlms)
        elif kind is AlgoKind.SM_NLMS:
            r = filters.sm_nlms_kernel(self.w, x, d, self.gamma)
        elif kind is AlgoKind.ORACLE_SM_NLMS:
            if mask is not self._mask:
                # the oracle knows every tap outside the new support is zero
                self.w = self.w * mask
                self._mask = mask
            r = filters.oracle_kernel(self.w, x, d, self.gamma, mask)
        else:
            p = self.spec.params
            r = filters.adp_kernel(
                self.w, self.alpha, x, d, self._penalty, self.gamma,
                p["alpha_max"], self._mode, p["denom_guard"], p["nonnegative_alpha"],
            )
            self.alpha = r.alpha
        self.w = r.weights
        return r


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one Monte-Carlo experiment.

    ``inputs`` may hold several input models; each algorithm is then run
    once per input model on the same driving noise.
    """

    schedule: PhaseSchedule
    algorithms: tuple[AlgorithmSpec, ...]
    inputs: tuple[InputModel, ...] = (InputModel(),)
    noise: NoiseModel = NoiseModel()
    runs: int = 200
    master_seed: int = 0
    gamma: float | None = None
    redraw_per_trial: bool = False
    sparse_support: tuple[int, ...] = DEFAULT_SPARSE_SUPPORT
    steady_fraction: float = STEADY_FRACTION

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        inputs = (self.inputs,) if isinstance(self.inputs, InputModel) else tuple(self.inputs)
        object.__setattr__(self, "inputs", inputs)
        if self.gamma is None:
            object.__setattr__(self, "gamma", math.sqrt(5) * self.noise.sigma_n)
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        if not self.inputs:
            raise ConfigError("at least one input model is required")
        if int(self.runs) < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not (math.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.steady_fraction <= 1:
            raise ConfigError("steady_fraction must lie in (0, 1]")
        labels = [c for c in self.curve_labels()]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate algorithm labels: {labels}")

    @property
    def input(self) -> InputModel:
        return self.inputs[0]

    def curve_labels(self) -> list[str]:
        if len(self.inputs) == 1:
            return [a.label for a in self.algorithms]
        return [f"{a.label} [{m.variant.value}]" for m in self.inputs for a in self.algorithms]

    def to_dict(self) -> dict:
        return {
            "schedule": [
                {"system": p.system.kind.value, "iterations": p.iterations, "taps": p.system.taps.tolist()}
                for p in self.schedule.phases
            ],
            "algorithms": [a.to_dict() for a in self.algorithms],
            "inputs": [{"variant": m.variant.value, "input_power": m.input_power} for m in self.inputs],
            "sigma_n": self.noise.sigma_n,
            "runs": int(self.runs),
            "master_seed": int(self.master_seed),
            "gamma": self.gamma,
            "redraw_per_trial": self.redraw_per_trial,
            "sparse_support": list(self.sparse_support),
            "steady_fraction": self.steady_fraction,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def build_schedule(phases: Sequence[tuple[str, int]], master_seed: int, taps: int = 64, sparse_support=None):
    """Create the plants of a schedule from ``(kind, iterations)`` pairs."""
    return PhaseSchedule(
        tuple(
            Phase(make_system(kind, plant_seed(master_seed, k), taps, sparse_support), int(n))
            for k, (kind, n) in enumerate(phases)
        )
    )


# -- simulation --------------------------------------------------------------


@dataclass
class TrialRecord:
    """Per-iteration trace of one algorithm on one trial.

    ``failed_at`` is the iteration at which the weights became non-finite,
    or ``None``; records of a failed trial are not meaningful past it.
    """

    e2: np.ndarray
    msd: np.ndarray
    updated: np.ndarray
    alpha: np.ndarray | None = None
    failed_at: int | None = None


def _plants(config: ExperimentConfig, seeds: Sequence[int]):
    """Per-phase tap arrays, shape (taps,) or (batch, taps) when redrawn."""
    out = []
    for k, phase in enumerate(config.schedule.phases):
        if config.redraw_per_trial:
            h = np.stack(
                [
                    make_system(phase.system.kind, plant_seed(s, k), config.schedule.taps, config.sparse_support).taps
                    for s in seeds
                ]
            )
        else:
            h = phase.system.taps
        out.append(h)
    return out


def _simulate(config: ExperimentConfig, algorithms, trial_indices, input_model: InputModel):
    """Run ``algorithms`` on the given trials; returns batched arrays per algorithm.

    Also returns the per-iteration sum over trials of the clean plant output
    power, used to report the achieved SNR.
    """
    schedule = config.schedule
    n, taps = schedule.total, schedule.taps
    seeds = [trial_seed(config.master_seed, t) for t in trial_indices]
    b = len(seeds)
    v = np.stack([np.random.default_rng([s, 0]).standard_normal(n) for s in seeds])
    noise = np.stack([np.random.default_rng([s, 1]).standard_normal(n) for s in seeds])
    xpad = np.concatenate([np.zeros((b, taps - 1)), shape_input(input_model, v)], axis=1)
    plants = _plants(config, seeds)
    masks = [h != 0 for h in plants]
    phase_of = np.repeat(np.arange(len(plants)), [p.iterations for p in schedule.phases])
    sigma = config.noise.sigma_n

    runners = [_Runner(a, config.gamma, b, taps) for a in algorithms]
    e2 = np.empty((len(runners), b, n))
    msd = np.empty((len(runners), b, n))
    upd = np.empty((len(runners), b, n), dtype=bool)
    alpha = np.full((len(runners), b, n), np.nan)
    failed_at = np.full((len(runners), b), -1)
    clean_power = np.empty(n)

    with np.errstate(all="ignore"):
        for i in range(n):
            x = xpad[:, i : i + taps][:, ::-1]
            k = phase_of[i]
            h = plants[k]
            y = (h * x).sum(axis=-1)
            d = y + sigma * noise[:, i]
            clean_power[i] = (y * y).sum()
            for j, run in enumerate(runners):
                r = run.step(x, d, masks[k])
                e2[j, :, i] = r.e * r.e
                msd[j, :, i] = ((run.w - h) ** 2).sum(axis=-1)
                upd[j, :, i] = r.updated
                if run.alpha is not None:
                    alpha[j, :, i] = run.alpha
                bad = ~np.isfinite(run.w).all(axis=-1)
                if bad.any():
                    new = bad & (failed_at[j] < 0)
                    failed_at[j, new] = i
                    for t in np.flatnonzero(new):
                        logger.warning(
                            "%s diverged in trial %d at iteration %d", run.spec.label, trial_indices[t], i
                        )
                    run.w[bad] = 0.0
                    if run.alpha is not None:
                        run.alpha = np.where(bad, 0.0, run.alpha)
    return e2, msd, upd, alpha, failed_at, clean_power


def run_trial(config: ExperimentConfig, algorithm: AlgorithmSpec, trial_index: int, input_index: int = 0) -> TrialRecord:
    """Simulate one trial of one algorithm over the whole schedule."""
    e2, msd, upd, alpha, failed_at, _ = _simulate(config, [algorithm], [trial_index], config.inputs[input_index])
    fa = int(failed_at[0, 0])
    return TrialRecord(
        e2[0, 0],
        msd[0, 0],
        upd[0, 0],
        alpha[0, 0] if algorithm.kind in _PENALIZED else None,
        None if fa < 0 else fa,
    )


@dataclass
class LearningCurve:
    """Trial-averaged learning curve of one algorithm under one input model."""

    label: str
    algorithm: AlgorithmSpec
    input: InputModel
    mse: np.ndarray
    msd: np.ndarray
    updated_frac: np.ndarray
    boundaries: list[int]
    phase_kinds: list[str]
    runs_ok: int
    runs_failed: int
    alpha: np.ndarray | None = None
    snr_db: list[float] = field(default_factory=list)
    steady_fraction: float = STEADY_FRACTION
    digest: str = ""

    def __len__(self):
        return self.mse.size

    @property
    def cumulative_update_rate(self) -> np.ndarray:
        return np.cumsum(self.updated_frac) / np.arange(1, self.updated_frac.size + 1)

    def phase_slice(self, phase: int, steady: bool = False) -> slice:
        lo, hi = self.boundaries[phase], self.boundaries[phase + 1]
        if steady:
            lo = steady_start(lo, hi, self.steady_fraction)
        return slice(lo, hi)

    def steady_state(self, metric: str = "mse", phase: int = 0) -> float:
        """Average of ``metric`` over the steady-state window of ``phase`` (linear units)."""
        return float(getattr(self, metric)[self.phase_slice(phase, steady=True)].mean())

    def steady_state_db(self, metric: str = "mse", phase: int = 0) -> float:
        return 10 * math.log10(self.steady_state(metric, phase))

    def iterations_to(self, level_db: float, metric: str = "msd", phase: int = 0) -> int | None:
        """Iterations after the start of ``phase`` until ``metric`` first drops
        to ``level_db`` or below; ``None`` if it never does within the phase."""
        sl = self.phase_slice(phase)
        with np.errstate(divide="ignore"):
            hit = np.flatnonzero(10 * np.log10(getattr(self, metric)[sl]) <= level_db)
        return int(hit[0]) + 1 if hit.size else None

    def update_rate(self, phase: int | None = None, steady: bool = False) -> float:
        sl = slice(None) if phase is None else self.phase_slice(phase, steady)
        return float(self.updated_frac[sl].mean())


def steady_start(lo: int, hi: int, fraction: float = STEADY_FRACTION) -> int:
    """First iteration of the steady-state window: the last ``fraction`` of a phase."""
    return hi - max(1, int(round((hi - lo) * fraction)))


def update_rate(records) -> float:
    """Fraction of iterations on which the filter updated.

    Accepts a :class:`TrialRecord`, a :class:`LearningCurve` or a boolean array.
    """
    if isinstance(records, TrialRecord):
        arr = records.updated
    elif isinstance(records, LearningCurve):
        arr = records.updated_frac
    else:
        arr = np.asarray(records, dtype=float)
    if arr.size == 0:
        raise ValueError("update_rate needs at least one iteration")
    return float(np.mean(arr))


def phase_update_rates(records, boundaries: Sequence[int]) -> list[float]:
    """:func:`update_rate` restricted to each phase."""
    arr = records.updated if isinstance(records, TrialRecord) else records
    arr = arr.updated_frac if isinstance(arr, LearningCurve) else np.asarray(arr, dtype=float)
    return [update_rate(arr[lo:hi]) for lo, hi in zip(boundaries[:-1], boundaries[1:])]


def run_monte_carlo(config: ExperimentConfig, chunk_size: int = CHUNK_SIZE) -> list[LearningCurve]:
    """Average :func:`run_trial` over ``config.runs`` trials for every algorithm.

    Failed trials are dropped from the averages and counted in
    ``runs_failed``.  Raises :class:`ExperimentError` when an algorithm has no
    successful trial at all.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    schedule = config.schedule
    n = schedule.total
    n_alg = len(config.algorithms)
    bounds = schedule.boundaries
    digest = config.digest()
    curves = []
    for model in config.inputs:
        sums = np.zeros((3, n_alg, n))
        alpha_sum = np.zeros((n_alg, n))
        ok = np.zeros(n_alg, dtype=int)
        power = np.zeros(n)
        for lo in range(0, config.runs, chunk_size):
            idx = list(range(lo, min(lo + chunk_size, config.runs)))
            e2, msd, upd, alpha, failed_at, clean = _simulate(config, config.algorithms, idx, model)
            power += clean
            for j in range(n_alg):
                good = failed_at[j] < 0
                ok[j] += int(good.sum())
                sums[0, j] += e2[j, good].sum(axis=0)
                sums[1, j] += msd[j, good].sum(axis=0)
                sums[2, j] += upd[j, good].sum(axis=0)
                alpha_sum[j] += alpha[j, good].sum(axis=0)
        signal_power = [power[a:b].mean() / config.runs for a, b in zip(bounds[:-1], bounds[1:])]
        snr = [10 * math.log10(p / config.noise.sigma_n**2) for p in signal_power]
        for j, algo in enumerate(config.algorithms):
            label = algo.label if len(config.inputs) == 1 else f"{algo.label} [{model.variant.value}]"
            if ok[j] == 0:
                raise ExperimentError(f"all {config.runs} trials of {label} diverged")
            if ok[j] < config.runs:
                logger.warning("%s: %d of %d trials failed and were excluded", label, config.runs - ok[j], config.runs)
            curves.append(
                LearningCurve(
                    label=label,
                    algorithm=algo,
                    input=model,
                    mse=sums[0, j] / ok[j],
                    msd=sums[1, j] / ok[j],
                    updated_frac=sums[2, j] / ok[j],
                    boundaries=list(bounds),
                    phase_kinds=[p.system.kind.value for p in schedule.phases],
                    runs_ok=int(ok[j]),
                    runs_failed=int(config.runs - ok[j]),
                    alpha=alpha_sum[j] / ok[j] if algo.kind in _PENALIZED else None,
                    snr_db=snr,
                    steady_fraction=config.steady_fraction,
                    digest=digest,
                )
            )
    return curves
