"""Fitting practical exponential envelopes to empirical moment curves.

A practical exponential envelope has the form

    value(t) <= prefactor * basis_moment * exp(-rate * t) + offset,

where ``basis_moment`` is the initial-data moment appropriate to the
equation kind (segment sup-moment for delay kinds, initial-point moment
otherwise).  The fit is offset-first: the additive floor is read off the
tail of the curve, the rate and prefactor come from a least-squares line
through the log-residuals over the decay window, and the parameters are
then minimally inflated so the envelope dominates the whole curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .certify import PARAM_KINDS, StabilityParams
from .sublinear import MomentCurve

__all__ = [
    "FitConfig",
    "FitResult",
    "fit_practical_stability",
    "verify_envelope",
]

NO_DECAY_VERDICT = "no practical exponential decay detected"
FITTED_VERDICT = "practical exponential envelope fitted"


@dataclass(frozen=True)
class FitConfig:
    """Knobs of the envelope fit.

    ``tail_fraction`` of the samples (from the end) estimates the offset;
    ``decay_window`` gives the fractions of the time span used for the
    rate regression; residuals are floored at ``log_floor`` before taking
    logs; inflations get a ``headroom`` relative margin so dominance is
    robust to rounding.
    """

    tail_fraction: float = 0.2
    decay_window: tuple = (0.0, 0.6)
    log_floor: float = 1e-12
    headroom: float = 1e-12

    def __post_init__(self) -> None:
        if not 0.0 < self.tail_fraction <= 1.0:
            raise ValueError("tail_fraction must lie in (0, 1]")
        lo, hi = self.decay_window
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError("decay_window must satisfy 0 <= lo < hi <= 1")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be positive")
        if not 0.0 <= self.headroom < 1.0:
            raise ValueError("headroom must lie in [0, 1)")


@dataclass(frozen=True)
class FitResult:
    """Fit outcome: envelope parameters plus diagnostics.

    ``params`` is None when no decay was detected (``decaying`` False and
    ``verdict`` says so).  The raw values are the pre-inflation estimates;
    the inflation fields record how much dominance demanded (1 and 0 mean
    none was needed).
    """

    params: Optional[StabilityParams]
    decaying: bool
    verdict: str
    r_squared: float
    raw_prefactor: float
    raw_rate: float
    raw_offset: float
    prefactor_inflation: float
    offset_inflation: float
    basis_moment: float
    kind: str


def _curve_arrays(curve):
    if isinstance(curve, MomentCurve):
        return curve.times, curve.values
    times, values = curve
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.ndim != 1 or times.shape != values.shape:
        raise ValueError("curve must provide matching 1-D times and values")
    return times, values


def fit_practical_stability(
    curve,
    basis_moment: float,
    kind: str,
    config: Optional[FitConfig] = None,
) -> FitResult:
    """Fit a dominating practical exponential envelope to a moment curve.

    ``curve`` is a :class:`MomentCurve` or a ``(times, values)`` pair;
    ``basis_moment`` is the initial-data moment the prefactor is measured
    against and must be positive; ``kind`` labels which equation the curve
    came from.  A non-positive fitted rate yields a no-decay verdict with
    ``params`` None instead of an error.
    """
    cfg = config or FitConfig()
    if kind not in PARAM_KINDS:
        raise ValueError(f"kind must be one of {PARAM_KINDS}")
    if not (math.isfinite(basis_moment) and basis_moment > 0):
        raise ValueError("basis_moment must be finite and positive")
    times, values = _curve_arrays(curve)
    if times.size < 4:
        raise ValueError("need at least four samples to fit an envelope")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValueError("curve values must be finite and non-negative")

    n_tail = max(1, math.ceil(cfg.tail_fraction * times.size))
    raw_offset = float(np.mean(values[-n_tail:]))

    span = times[-1] - times[0]
    lo = times[0] + cfg.decay_window[0] * span
    hi = times[0] + cfg.decay_window[1] * span
    mask = (times >= lo) & (times <= hi)
    if int(mask.sum()) < 2:
        raise ValueError("decay window holds fewer than two samples")
    t_win = times[mask]
    resid = values[mask] - raw_offset
    # Only residuals above the floor carry decay information; a curve
    # that is flat or rising leaves (almost) none after the offset is
    # subtracted, and clamped logs would fake a zero-slope "decay".
    live = resid > cfg.log_floor
    if int(live.sum()) < 2:
        return FitResult(
            params=None,
            decaying=False,
            verdict=NO_DECAY_VERDICT,
            r_squared=0.0,
            raw_prefactor=math.nan,
            raw_rate=math.nan,
            raw_offset=raw_offset,
            prefactor_inflation=1.0,
            offset_inflation=0.0,
            basis_moment=basis_moment,
            kind=kind,
        )
    t_live = t_win[live]
    y = np.log(resid[live])
    slope, intercept = np.polyfit(t_live, y, 1)
    fitted = intercept + slope * t_live
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    rate = float(-slope)
    raw_prefactor = float(math.exp(intercept) / basis_moment)

    if not (math.isfinite(rate) and rate > 0):
        return FitResult(
            params=None,
            decaying=False,
            verdict=NO_DECAY_VERDICT,
            r_squared=r_squared,
            raw_prefactor=raw_prefactor,
            raw_rate=rate,
            raw_offset=raw_offset,
            prefactor_inflation=1.0,
            offset_inflation=0.0,
            basis_moment=basis_moment,
            kind=kind,
        )

    # Minimal inflation, multiplicative first: scale the prefactor until it
    # covers the residuals over the decay window.
    env_win = raw_prefactor * basis_moment * np.exp(-rate * t_win)
    pos = resid > 0
    factor = 1.0
    if np.any(pos):
        factor = max(1.0, float(np.max(resid[pos] / env_win[pos])))
    factor *= 1.0 + cfg.headroom
    prefactor = raw_prefactor * factor

    # Then additive: raise the offset by the worst remaining deficit over
    # the whole curve, nudging by ulps if rounding still leaves a gap.
    decay_term = prefactor * basis_moment * np.exp(-rate * times)
    deficit = float(np.max(values - (decay_term + raw_offset)))
    offset = raw_offset + max(0.0, deficit) * (1.0 + cfg.headroom)
    for _ in range(64):
        if np.all(values <= decay_term + offset):
            break
        offset = float(np.nextafter(offset, math.inf))
    extra = offset - raw_offset

    return FitResult(
        params=StabilityParams(prefactor, rate, offset, kind),
        decaying=True,
        verdict=FITTED_VERDICT,
        r_squared=r_squared,
        raw_prefactor=raw_prefactor,
        raw_rate=rate,
        raw_offset=raw_offset,
        prefactor_inflation=factor,
        offset_inflation=extra,
        basis_moment=basis_moment,
        kind=kind,
    )


def verify_envelope(curve, params: StabilityParams, basis_moment: float):
    """Check that the envelope dominates the curve everywhere.

    Returns ``(ok, worst_slack)`` where ``worst_slack`` is the signed
    minimum of envelope minus curve (negative means a violation).
    """
    if not (math.isfinite(basis_moment) and basis_moment >= 0):
        raise ValueError("basis_moment must be finite and non-negative")
    times, values = _curve_arrays(curve)
    env = params.envelope(times, basis_moment)
    slack = env - values
    return bool(np.all(slack >= 0)), float(np.min(slack))
