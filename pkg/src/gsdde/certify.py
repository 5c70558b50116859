"""Closed-form moment bounds and practical-stability transfer certificates.

Everything here is exact arithmetic on the structural constants of the
problem: the moment order ``p >= 2``, the squared-increment Lipschitz
constant ``lipschitz`` (L), the linear-growth constant ``growth`` (L_hat),
the worst-case volatility ``sigma_hi``, the delay ``tau``, and the scheme
step ``step``.  No simulation is involved; the certificates hold for every
admissible volatility scenario because only the upper volatility bound
enters.

Four transfer directions form a cycle over the equation kinds::

    SDDE --(small tau)--> SDE --(small step)--> EM-SDE
      ^                                            |
      '-- (small step) -- EM-SDDE <-- (small tau) -'

Each transfer derives a horizon ``T``, a contraction ``threshold`` whose
value at a vanishing small parameter is exactly the confidence offset
``delta_conf``, and new envelope parameters from the incoming ones.  A
threshold below one makes the certificate applicable and fixes the derived
decay rate as ``-ln(threshold) / T``.

Quantities with overflow risk are assembled in log space, so inapplicable
regimes yield an infinite threshold and a structured verdict instead of an
arithmetic error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "PARAM_KINDS",
    "GAP_MODES",
    "GLOSSARY",
    "StabilityParams",
    "CertReport",
    "bdg_constant",
    "odd_moment_constant",
    "lemma_bound_sdde",
    "lemma_bound_sde",
    "DelayDiffConstants",
    "delay_diff_constants",
    "delay_diff_bound",
    "em_onestep_constant_sde",
    "gap_bound",
    "transfer_sdde_to_sde",
    "transfer_sde_to_emsde",
    "transfer_emsde_to_emsdde",
    "transfer_emsdde_to_sdde",
    "transfer_chain",
]

PARAM_KINDS = ("SDDE", "SDE", "EM-SDDE", "EM-SDE")
SEGMENT_BASIS = "segment-sup"
POINT_BASIS = "initial-point"
GAP_MODES = ("sdde-sde", "sde-emsde", "emsdde-emsde", "sdde-emsdde")

GLOSSARY = {
    "p": "moment order",
    "lipschitz": "squared-increment Lipschitz constant",
    "growth": "linear-growth constant",
    "sigma_hi": "upper volatility bound",
    "tau": "delay",
    "step": "scheme step size",
    "delta_conf": "confidence offset in (0, 1)",
    "segment_ratio": "segment sup-norm moment over initial-point moment",
    "prefactor": "envelope prefactor",
    "rate": "envelope decay rate",
    "offset": "envelope additive offset",
    "horizon": "certificate horizon",
    "horizon_steps": "horizon as an exact multiple of the small parameter",
    "threshold": "contraction factor over one horizon",
    "span": "window length entering the growth exponents",
    "C_p": "martingale moment constant",
    "odd_moment": "odd-order Gaussian absolute-moment constant",
    "D1": "one-step moment constant of the delay-free scheme",
    "K1": "delay-difference prefactor beyond one delay",
    "N1": "delay-difference offset beyond one delay",
    "K2": "delay-difference prefactor within one delay",
    "N2": "delay-difference offset within one delay",
    "theta_x": "delay-equation moment growth exponent",
    "theta_y": "delay-free-equation moment growth exponent",
    "theta_1": "delay-difference growth exponent",
    "theta_2": "equation-gap growth exponent",
    "theta_5": "scheme-gap growth exponent",
    "kappa_a": "scheme-gap envelope exponent",
    "kappa_b": "delay-free moment envelope exponent",
    "d3": "raw offset carried into the derived SDE envelope",
    "d4": "raw offset carried into the derived EM-SDE envelope",
    "d6": "raw offset carried into the derived EM-SDDE envelope",
    "d8": "raw offset carried into the derived SDDE envelope",
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def _pos_finite(x: float, name: str) -> float:
    x = float(x)
    _require(math.isfinite(x) and x > 0, f"{name} must be finite and positive")
    return x


def _nonneg_finite(x: float, name: str) -> float:
    x = float(x)
    _require(math.isfinite(x) and x >= 0, f"{name} must be finite and >= 0")
    return x


def _check_core(p: float, growth: float, sigma_hi: float) -> None:
    _require(math.isfinite(p) and p >= 2, "p must be finite and >= 2")
    _pos_finite(growth, "growth")
    _nonneg_finite(sigma_hi, "sigma_hi")


def _exp(x: float) -> float:
    """exp that saturates to +inf instead of raising on overflow."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _log(x: float) -> float:
    """log with log(0) == -inf, for assembling products in log space."""
    return math.log(x) if x > 0 else -math.inf


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


# ---------------------------------------------------------------------------
# moment-growth exponents (each used by several bounds)
# ---------------------------------------------------------------------------


def _theta_x(p: float, growth: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 3 * p * growth - 2 * growth
        + s2 * (p + 2 * p * p * growth - p * growth)
    ) / 2.0


def _theta_y(p: float, growth: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 3 * p * growth - 2 * growth
        + s2 * p * (1 - 2 * growth + 3 * p * growth)
    ) / 2.0


def _theta_1(p: float, growth: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 2 * p * growth + s2 * (p + p * p * growth + p * growth)
    ) / 2.0


def _theta_2(p: float, lipschitz: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 5 * p * lipschitz - 4 * lipschitz
        + s2 * (p + 5 * p * p * lipschitz - 4 * p * lipschitz)
    ) / 2.0


def _theta_5(p: float, lipschitz: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 8 * p * lipschitz - 8 * lipschitz
        + s2 * (p + 8 * p * p * lipschitz - 8 * p * lipschitz)
    ) / 2.0


def _rate_gap_sde(p: float, lipschitz: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        4 * p * lipschitz - 4 * lipschitz + p / 2.0
        + s2 * (p / 2.0 + 4 * p * p * lipschitz - 4 * p * lipschitz)
    )


def _kappa_a(p: float, lipschitz: float, sigma_hi: float) -> float:
    s2 = sigma_hi * sigma_hi
    return (
        p + 4 * p * lipschitz - 8 * lipschitz
        + s2 * (p + 8 * p * p * lipschitz - 8 * p * lipschitz)
    )


def _drift(p: float, growth: float, sigma_hi: float) -> float:
    """L_hat + sigma_hi^2 p L_hat."""
    return growth * (1.0 + sigma_hi * sigma_hi * p)


def _wrap(p: float, growth: float, sigma_hi: float, tau: float) -> float:
    """1 + L_hat tau + sigma_hi^2 p L_hat tau."""
    return 1.0 + growth * tau * (1.0 + sigma_hi * sigma_hi * p)


def _gap_coef(p: float, lipschitz: float, sigma_hi: float) -> float:
    """L + sigma_hi^2 p L."""
    return lipschitz * (1.0 + sigma_hi * sigma_hi * p)


def _b_factor(p: float, growth: float, sigma_hi: float, tau: float) -> float:
    """tau^{p/2} (1 + sigma_hi^{2p}) + C(p) sigma_hi^p."""
    return (
        tau ** (p / 2.0)
        + sigma_hi ** (2.0 * p) * tau ** (p / 2.0)
        + bdg_constant(p) * sigma_hi**p
    )


# ---------------------------------------------------------------------------
# standalone constants and bounds
# ---------------------------------------------------------------------------


def bdg_constant(p: float) -> float:
    """Moment constant (p^{p+1} / (2 (p-1)^{p-1}))^{p/2} for p >= 2.

    Controls the p-th moment of a stochastic integral against the driving
    noise in terms of the integrated squared integrand.
    """
    p = float(p)
    _require(math.isfinite(p) and p >= 2, "p must be finite and >= 2")
    return (p ** (p + 1.0) / (2.0 * (p - 1.0) ** (p - 1.0))) ** (p / 2.0)


def odd_moment_constant(p: float) -> float:
    """Continuation 2^p Gamma(p + 1/2) / sqrt(pi) of (2p - 1)!! to real p.

    Equals the double factorial at integer p (3 at p = 2, 105 at p = 4) and
    bounds the 2p-th absolute moment of a standard normal variable.
    """
    p = float(p)
    _require(math.isfinite(p) and p >= 2, "p must be finite and >= 2")
    return 2.0**p * math.gamma(p + 0.5) / math.sqrt(math.pi)


def lemma_bound_sdde(
    p: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    seg_norm: float,
    span: float,
) -> float:
    """Worst-case p-th moment bound for the delay equation and its scheme.

    Bounds sup of E|x(t)|^p over a window of length ``span`` started from a
    segment with sup-moment ``seg_norm``; the same bound covers the
    continuous solution and its Euler discretization.  At ``span == 0`` it
    reduces to ``(1 + L_hat tau + sigma_hi^2 p L_hat tau) seg_norm``.
    """
    _check_core(p, growth, sigma_hi)
    tau = _nonneg_finite(tau, "tau")
    seg_norm = _nonneg_finite(seg_norm, "seg_norm")
    span = _nonneg_finite(span, "span")
    drift = _drift(p, growth, sigma_hi)
    wrap = _wrap(p, growth, sigma_hi, tau)
    return (drift * span + wrap * seg_norm) * _exp(
        _theta_x(p, growth, sigma_hi) * span
    )


def lemma_bound_sde(
    p: float,
    growth: float,
    sigma_hi: float,
    init_moment: float,
    span: float,
) -> float:
    """Worst-case p-th moment bound for the delay-free equation and scheme.

    Bounds sup of E|y(t)|^p over a window of length ``span`` started from a
    point with p-th moment ``init_moment``; reduces to ``init_moment`` at
    ``span == 0``.
    """
    _check_core(p, growth, sigma_hi)
    init_moment = _nonneg_finite(init_moment, "init_moment")
    span = _nonneg_finite(span, "span")
    drift = _drift(p, growth, sigma_hi)
    return (init_moment + drift * span) * _exp(
        _theta_y(p, growth, sigma_hi) * span
    )


class DelayDiffConstants(NamedTuple):
    """Constants (K1, N1, K2, N2) bounding E|x(t) - x(t - tau)|^p."""

    k1: float
    n1: float
    k2: float
    n2: float


def delay_diff_constants(
    p: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    span: float,
) -> DelayDiffConstants:
    """Constants of the delay-difference bound over a window of length span.

    Beyond one delay the difference moment is bounded by
    ``tau^{p/2} (K1 seg_norm e^{theta_1 span} + N1)``; within the first
    delay of the window it is bounded by ``K2 seg_norm + N2``.  N1 depends
    on the window length; K1, K2, N2 do not.
    """
    _check_core(p, growth, sigma_hi)
    tau = _nonneg_finite(tau, "tau")
    span = _nonneg_finite(span, "span")
    b = _b_factor(p, growth, sigma_hi, tau)
    drift = _drift(p, growth, sigma_hi)
    wrap = _wrap(p, growth, sigma_hi, tau)
    gp = growth ** (p / 2.0)
    k1 = 3.0 ** (1.5 * p - 1.0) * gp * wrap * b
    n1 = (
        3.0 ** (1.5 * p - 2.0)
        * gp
        * (1.0 + 2.0 * drift * span * _exp(_theta_1(p, growth, sigma_hi) * span))
        * b
    )
    e_tau = _exp(_theta_x(p, growth, sigma_hi) * tau)
    k2 = 2.0 ** (p - 1.0) * (1.0 + wrap * e_tau)
    n2 = 2.0 ** (p - 1.0) * tau * drift * e_tau
    return DelayDiffConstants(k1, n1, k2, n2)


def delay_diff_bound(
    p: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    seg_norm: float,
    span: float,
    window: str = "post-delay",
) -> float:
    """Bound on E|x(t) - x(t - tau)|^p over one of the two window parts.

    ``window="post-delay"`` covers times at least one delay into the window
    (bound ``tau^{p/2} (K1 seg_norm e^{theta_1 span} + N1)``);
    ``window="initial"`` covers the first delay of the window (bound
    ``K2 seg_norm + N2``, where the difference still reaches into the
    initial segment).
    """
    seg_norm = _nonneg_finite(seg_norm, "seg_norm")
    consts = delay_diff_constants(p, growth, sigma_hi, tau, span)
    if window == "post-delay":
        return tau ** (p / 2.0) * (
            consts.k1 * seg_norm * _exp(_theta_1(p, growth, sigma_hi) * span)
            + consts.n1
        )
    if window == "initial":
        return consts.k2 * seg_norm + consts.n2
    raise ValueError("window must be 'post-delay' or 'initial'")


def em_onestep_constant_sde(
    p: float,
    growth: float,
    sigma_hi: float,
    tau: float,
) -> float:
    """One-step moment constant D1 of the delay-free scheme.

    ``3^{3p/2-2} L_hat^{p/2} (tau^{p/2} (1 + sigma_hi^{2p}) +
    sigma_hi^p sqrt((2p-1)!!))``.  The scale argument is named ``tau`` to
    match the delay-equation constants it mirrors; call sites bounding a
    scheme of step ``delta`` pass that step as the scale.
    """
    _check_core(p, growth, sigma_hi)
    tau = _nonneg_finite(tau, "tau")
    return (
        3.0 ** (1.5 * p - 2.0)
        * growth ** (p / 2.0)
        * (
            tau ** (p / 2.0)
            + sigma_hi ** (2.0 * p) * tau ** (p / 2.0)
            + sigma_hi**p * math.sqrt(odd_moment_constant(p))
        )
    )


def gap_bound(
    mode: str,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    span: float,
    tau: float = 0.0,
    step: float = 0.0,
    seg_norm: float = 0.0,
    init_moment: float = 0.0,
    display_form: bool = False,
) -> float:
    """Worst-case p-th moment bound on the gap between two of the four flows.

    Modes (all over a window of length ``span``):

    - ``"sdde-sde"``: delay equation vs delay-free equation sharing the
      segment endpoint; needs ``tau`` and ``seg_norm``.  Vanishes as
      tau -> 0.
    - ``"sde-emsde"``: delay-free equation vs its scheme; needs ``step``
      and ``init_moment``; the one-step constant is taken at scale
      ``step`` (pass ``tau`` > 0 to force the delay scale instead).
      Vanishes as step -> 0.
    - ``"emsdde-emsde"``: delay scheme vs delay-free scheme sharing the
      segment endpoint; needs ``tau`` and ``seg_norm``.
    - ``"sdde-emsdde"``: delay equation vs delay scheme; needs ``tau``,
      ``step`` and ``seg_norm``; scales as step^{p/2}.  With
      ``display_form=True`` the intermediate constant keeps a redundant
      step^{p/2} factor (the published closed form); the default follows
      the derivation, where that factor appears exactly once.
    """
    _check_core(p, growth, sigma_hi)
    _pos_finite(lipschitz, "lipschitz")
    span = _nonneg_finite(span, "span")
    tau = _nonneg_finite(tau, "tau")
    step = _nonneg_finite(step, "step")
    seg_norm = _nonneg_finite(seg_norm, "seg_norm")
    init_moment = _nonneg_finite(init_moment, "init_moment")
    c = _gap_coef(p, lipschitz, sigma_hi)

    if mode == "sdde-sde":
        consts = delay_diff_constants(p, growth, sigma_hi, tau, span)
        inner = (consts.k2 * seg_norm + consts.n2) * tau + tau ** (p / 2.0) * (
            consts.k1 * seg_norm * _exp(_theta_1(p, growth, sigma_hi) * span)
            + consts.n1 * span
        )
        return 2.0 * c * inner * _exp(_theta_2(p, lipschitz, sigma_hi) * span)

    if mode == "sde-emsde":
        scale = tau if tau > 0 else step
        d1 = em_onestep_constant_sde(p, growth, sigma_hi, scale)
        bracket = span + 2.0 * (
            init_moment + _drift(p, growth, sigma_hi) * span
        ) * _exp(_theta_y(p, growth, sigma_hi) * span)
        return (
            4.0
            * d1
            * c
            * step ** (p / 2.0)
            * _exp(_rate_gap_sde(p, lipschitz, sigma_hi) * span)
            * bracket
        )

    if mode == "emsdde-emsde":
        _require(tau > 0, "mode 'emsdde-emsde' needs tau > 0")
        consts = delay_diff_constants(p, growth, sigma_hi, tau, span)
        d5 = 2.0 * c * (
            tau ** (p / 2.0 - 1.0)
            * (
                consts.k1
                * seg_norm
                * _exp(_theta_1(p, growth, sigma_hi) * span)
                + consts.n1
            )
            + (consts.k2 * seg_norm + consts.n2)
        )
        return d5 * tau * _exp(_theta_2(p, lipschitz, sigma_hi) * span)

    if mode == "sdde-emsdde":
        b = _b_factor(p, growth, sigma_hi, tau)
        bracket = 1.0 + 2.0 * (
            _drift(p, growth, sigma_hi) * span
            + _wrap(p, growth, sigma_hi, tau) * seg_norm
        ) * _exp(_theta_x(p, growth, sigma_hi) * span)
        d7 = 3.0 ** (1.5 * p - 2.0) * growth ** (p / 2.0) * b * bracket
        if display_form:
            d7 *= step ** (p / 2.0)
        return (
            4.0
            * c
            * d7
            * step ** (p / 2.0)
            * _exp(_theta_5(p, lipschitz, sigma_hi) * span)
        )

    raise ValueError(f"mode must be one of {GAP_MODES}")


# ---------------------------------------------------------------------------
# envelope parameters and certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityParams:
    """Parameters (M, lambda, d) of a practical exponential envelope.

    The envelope reads ``E|z(t)|^p <= M * basis * exp(-lambda t) + d``,
    where ``basis`` is the segment sup-moment of the initial data for the
    delay kinds and the initial-point moment for the delay-free kinds.
    """

    prefactor: float
    rate: float
    offset: float
    kind: str

    def __post_init__(self) -> None:
        _pos_finite(self.prefactor, "prefactor")
        _pos_finite(self.rate, "rate")
        _nonneg_finite(self.offset, "offset")
        _require(self.kind in PARAM_KINDS, f"kind must be one of {PARAM_KINDS}")

    @property
    def basis(self) -> str:
        return SEGMENT_BASIS if self.kind in ("SDDE", "EM-SDDE") else POINT_BASIS

    def envelope(self, t, basis_moment: float):
        """Evaluate M * basis_moment * exp(-lambda t) + d (vectorized in t)."""
        t = np.asarray(t, dtype=float)
        out = self.prefactor * basis_moment * np.exp(-self.rate * t) + self.offset
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CertReport:
    """Outcome of one stability transfer.

    ``threshold`` is the contraction factor accumulated over the derived
    horizon; the certificate is applicable exactly when it is below one, in
    which case the derived decay rate is ``-ln(threshold) / horizon`` and
    ``derived`` holds the new envelope parameters.  When inapplicable,
    ``derived`` is None and ``reason`` states why along with a remedy; no
    exception is raised for an honestly failing certificate.
    """

    direction: str
    inputs: dict
    horizon: float
    horizon_steps: Optional[int]
    threshold: float
    applicable: bool
    derived: Optional[StabilityParams]
    intermediates: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def rate(self) -> Optional[float]:
        """Derived decay rate -ln(threshold)/horizon (None if inapplicable)."""
        if not self.applicable:
            return None
        return -math.log(self.threshold) / self.horizon

    def to_json_dict(self) -> dict:
        derived = None
        if self.derived is not None:
            derived = {
                "prefactor": self.derived.prefactor,
                "rate": self.derived.rate,
                "offset": self.derived.offset,
                "kind": self.derived.kind,
                "basis": self.derived.basis,
            }
        return {
            "direction": self.direction,
            "applicable": self.applicable,
            "threshold": self.threshold,
            "horizon": self.horizon,
            "horizon_steps": self.horizon_steps,
            "rate": self.rate,
            "derived": derived,
            "reason": self.reason,
            "inputs": dict(self.inputs),
            "intermediates": {
                k: self.intermediates[k] for k in sorted(self.intermediates)
            },
        }


def _start_echo(start: StabilityParams) -> dict:
    return {
        "start_prefactor": start.prefactor,
        "start_rate": start.rate,
        "start_offset": start.offset,
        "start_kind": start.kind,
    }


def _inapplicable(
    direction: str,
    inputs: dict,
    horizon: float,
    horizon_steps: Optional[int],
    threshold: float,
    intermediates: dict,
    reason: str,
) -> CertReport:
    return CertReport(
        direction=direction,
        inputs=inputs,
        horizon=horizon,
        horizon_steps=horizon_steps,
        threshold=threshold,
        applicable=False,
        derived=None,
        intermediates=intermediates,
        reason=reason,
    )


def _finish(
    direction: str,
    inputs: dict,
    horizon: float,
    horizon_steps: Optional[int],
    threshold: float,
    intermediates: dict,
    prefactor: float,
    offset: float,
    kind: str,
    remedy: str,
) -> CertReport:
    """Assemble the report once threshold and derived parameters are known."""
    if not (threshold < 1.0):
        return _inapplicable(
            direction,
            inputs,
            horizon,
            horizon_steps,
            threshold,
            intermediates,
            f"threshold {threshold:.6g} is not below one; {remedy}",
        )
    rate = -math.log(threshold) / horizon
    if not all(map(math.isfinite, (prefactor, offset, rate))):
        return _inapplicable(
            direction,
            inputs,
            horizon,
            horizon_steps,
            threshold,
            intermediates,
            f"derived envelope parameters overflow; {remedy}",
        )
    return CertReport(
        direction=direction,
        inputs=inputs,
        horizon=horizon,
        horizon_steps=horizon_steps,
        threshold=threshold,
        applicable=True,
        derived=StabilityParams(prefactor, rate, offset, kind),
        intermediates=intermediates,
    )


def transfer_sdde_to_sde(
    start: StabilityParams,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    delta_conf: float,
    segment_ratio: float = 1.0,
) -> CertReport:
    """Envelope of the delay equation implies one for the delay-free one.

    Small parameter: the delay ``tau``; the threshold equals ``delta_conf``
    exactly at tau == 0 and the certificate applies when it stays below
    one.  ``segment_ratio`` is the segment sup-moment of the initial data
    divided by its endpoint moment (1 for a constant segment); it enters
    the derived prefactor because the two envelopes use different bases.
    """
    _require(start.kind == "SDDE", "start parameters must have kind 'SDDE'")
    _check_core(p, growth, sigma_hi)
    _pos_finite(lipschitz, "lipschitz")
    tau = _nonneg_finite(tau, "tau")
    _require(0.0 < delta_conf < 1.0, "delta_conf must lie in (0, 1)")
    _pos_finite(segment_ratio, "segment_ratio")
    direction = "sdde-to-sde"
    m1, lam1, d1 = start.prefactor, start.rate, start.offset
    inputs = {
        **_start_echo(start),
        "p": p, "lipschitz": lipschitz, "growth": growth,
        "sigma_hi": sigma_hi, "tau": tau, "delta_conf": delta_conf,
        "segment_ratio": segment_ratio,
    }

    lead = 2.0 ** (p - 1.0) * m1 / delta_conf
    if lead < 1.0:
        return _inapplicable(
            direction, inputs, math.nan, None, math.inf, {},
            "confidence offset exceeds 2^{p-1} M; the incoming envelope "
            "already sits below it, so decrease delta_conf",
        )
    horizon = math.log(lead) / lam1 + tau
    span2 = 2.0 * horizon - tau
    consts = delay_diff_constants(p, growth, sigma_hi, tau, horizon)
    th1 = _theta_1(p, growth, sigma_hi)
    th2 = _theta_2(p, lipschitz, sigma_hi)
    c = _gap_coef(p, lipschitz, sigma_hi)
    cp = bdg_constant(p)

    if tau == 0.0:
        amp = 0.0
        d3 = 2.0 ** (p - 1.0) * d1
    else:
        log_amp = (
            _log(2.0**p * c)
            + _logaddexp(
                _log(consts.k2 * tau),
                _log(consts.k1) + (p / 2.0) * math.log(tau) + th1 * span2,
            )
            + th2 * span2
        )
        amp = _exp(log_amp)
        d3 = 2.0 ** (p - 1.0) * d1 + _exp(
            _log(2.0**p * c)
            + _log(consts.n2 * tau + consts.n1 * tau ** (p / 2.0) * span2)
            + th2 * span2
        )
    threshold = delta_conf + amp
    intermediates = {
        "C_p": cp, "K1": consts.k1, "N1": consts.n1,
        "K2": consts.k2, "N2": consts.n2,
        "theta_1": th1, "theta_2": th2, "span": span2, "d3": d3,
    }
    remedy = "decrease tau or delta_conf"
    if not (threshold < 1.0):
        return _inapplicable(
            direction, inputs, horizon, None, threshold, intermediates,
            f"threshold {threshold:.6g} is not below one; {remedy}",
        )
    # exp(-rate * horizon) == threshold by construction, so the geometric
    # series of offsets sums against (1 - threshold) exactly.
    lam2 = -math.log(threshold) / horizon
    m2 = (2.0 ** (p - 1.0) * m1 + 1.0) * segment_ratio * _exp(lam2 * horizon)
    d2 = d3 / (1.0 - threshold)
    return _finish(
        direction, inputs, horizon, None, threshold, intermediates,
        m2, d2, "SDE", remedy,
    )


def transfer_sde_to_emsde(
    start: StabilityParams,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    step: float,
    delta_conf: float,
) -> CertReport:
    """Envelope of the delay-free equation implies one for its scheme.

    Small parameter: the step; the threshold equals ``delta_conf`` exactly
    at step == 0 (the horizon then takes its limiting value).  The scheme
    iterates whole steps, counted in ``horizon_steps``; ``horizon`` is the
    smooth covering bound ``log(lead)/rate + step``, which dominates the
    stepped window, varies monotonically in the step (a stepped window
    would see-saw as the floor jumps), and is the span at which every
    amplification factor is evaluated, so the certificate only loosens.
    """
    _require(start.kind == "SDE", "start parameters must have kind 'SDE'")
    _check_core(p, growth, sigma_hi)
    _pos_finite(lipschitz, "lipschitz")
    step = _nonneg_finite(step, "step")
    _require(0.0 < delta_conf < 1.0, "delta_conf must lie in (0, 1)")
    direction = "sde-to-emsde"
    m2, lam2, d2 = start.prefactor, start.rate, start.offset
    inputs = {
        **_start_echo(start),
        "p": p, "lipschitz": lipschitz, "growth": growth,
        "sigma_hi": sigma_hi, "step": step, "delta_conf": delta_conf,
    }

    lead = 2.0 ** (p - 1.0) * m2 / delta_conf
    if lead < 1.0:
        return _inapplicable(
            direction, inputs, math.nan, None, math.inf, {},
            "confidence offset exceeds 2^{p-1} M; the incoming envelope "
            "already sits below it, so decrease delta_conf",
        )
    if step == 0.0:
        horizon_steps: Optional[int] = None
        horizon = math.log(lead) / lam2
    else:
        horizon_steps = math.floor(math.log(lead) / (lam2 * step)) + 1
        horizon = math.log(lead) / lam2 + step
    ka = _kappa_a(p, lipschitz, sigma_hi)
    kb = 2.0 * _theta_y(p, growth, sigma_hi)
    c = _gap_coef(p, lipschitz, sigma_hi)
    # One-step constant at the step scale: the scheme being certified has
    # no delay, so its one-step fluctuation is set by the step itself.
    d1c = em_onestep_constant_sde(p, growth, sigma_hi, step)
    if step == 0.0 or d1c == 0.0:
        amp = 0.0
        d4 = 2.0 ** (p - 1.0) * d2
    else:
        log_pow = (p / 2.0) * math.log(step)
        amp = _exp(
            _log(2.0 ** (p + 2.0) * d1c * c) + (ka + kb) * horizon + log_pow
        )
        d4 = 2.0 ** (p - 1.0) * d2 + _exp(
            _log(
                2.0 ** (p + 1.0)
                * d1c
                * horizon
                * c
                * (1.0 + 2.0 * growth * (1.0 + sigma_hi * sigma_hi * p))
            )
            + (ka + kb) * horizon
            + log_pow
        )
    threshold = delta_conf + amp
    intermediates = {
        "D1": d1c, "odd_moment": odd_moment_constant(p),
        "kappa_a": ka, "kappa_b": kb, "d4": d4,
    }
    remedy = "decrease the step or delta_conf"
    if not (threshold < 1.0):
        return _inapplicable(
            direction, inputs, horizon, horizon_steps, threshold,
            intermediates, f"threshold {threshold:.6g} is not below one; {remedy}",
        )
    # exp(rate * horizon) == 1 / threshold by construction.
    l2 = 2.0 ** (p - 1.0) * m2 / threshold + 1.0
    k2 = d4 / (1.0 - threshold)
    return _finish(
        direction, inputs, horizon, horizon_steps, threshold, intermediates,
        l2, k2, "EM-SDE", remedy,
    )


def transfer_emsde_to_emsdde(
    start: StabilityParams,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    delta_conf: float,
) -> CertReport:
    """Envelope of the delay-free scheme implies one for the delay scheme.

    Small parameter: the delay ``tau`` (the shared step divides it); the
    threshold equals ``delta_conf`` exactly at tau == 0.  The scheme
    iterates whole delays, counted in ``horizon_steps``; ``horizon`` is
    the smooth covering bound ``log(lead)/rate + 2 tau``, which dominates
    the stepped window, varies monotonically in tau (a stepped window
    would see-saw as the floor jumps), and is the span at which every
    amplification factor is evaluated, so the certificate only loosens.
    """
    _require(start.kind == "EM-SDE", "start parameters must have kind 'EM-SDE'")
    _check_core(p, growth, sigma_hi)
    _pos_finite(lipschitz, "lipschitz")
    tau = _nonneg_finite(tau, "tau")
    _require(0.0 < delta_conf < 1.0, "delta_conf must lie in (0, 1)")
    direction = "emsde-to-emsdde"
    l2, gam2, k2 = start.prefactor, start.rate, start.offset
    inputs = {
        **_start_echo(start),
        "p": p, "lipschitz": lipschitz, "growth": growth,
        "sigma_hi": sigma_hi, "tau": tau, "delta_conf": delta_conf,
    }

    lead = 2.0 ** (p - 1.0) * l2 / delta_conf
    if lead < 1.0:
        return _inapplicable(
            direction, inputs, math.nan, None, math.inf, {},
            "confidence offset exceeds 2^{p-1} M; the incoming envelope "
            "already sits below it, so decrease delta_conf",
        )
    if tau == 0.0:
        horizon_steps: Optional[int] = None
        horizon = math.log(lead) / gam2
    else:
        horizon_steps = math.floor(math.log(lead) / (gam2 * tau)) + 2
        horizon = math.log(lead) / gam2 + 2.0 * tau
    consts = delay_diff_constants(p, growth, sigma_hi, tau, horizon)
    th1 = _theta_1(p, growth, sigma_hi)
    th2 = _theta_2(p, lipschitz, sigma_hi)
    c = _gap_coef(p, lipschitz, sigma_hi)

    if tau == 0.0:
        amp = 0.0
        d6 = 2.0 ** (p - 1.0) * k2
    else:
        amp = _exp(
            _log(2.0**p * c)
            + _logaddexp(
                _log(consts.k1) + (p / 2.0) * math.log(tau) + 2.0 * th1 * horizon,
                _log(consts.k2 * tau),
            )
            + 2.0 * th2 * horizon
        )
        d6 = 2.0 ** (p - 1.0) * k2 + _exp(
            _log(2.0**p * c)
            + _log(
                2.0 * tau ** (p / 2.0) * horizon * consts.n1 + tau * consts.n2
            )
            + 2.0 * th2 * horizon
        )
    threshold = delta_conf + amp
    intermediates = {
        "C_p": bdg_constant(p), "K1": consts.k1, "N1": consts.n1,
        "K2": consts.k2, "N2": consts.n2,
        "theta_1": th1, "theta_2": th2, "d6": d6,
    }
    remedy = "decrease tau or delta_conf"
    if not (threshold < 1.0):
        return _inapplicable(
            direction, inputs, horizon, horizon_steps, threshold,
            intermediates, f"threshold {threshold:.6g} is not below one; {remedy}",
        )
    l1 = (2.0 ** (p - 1.0) * l2 + 1.0) / threshold
    k1 = d6 / (1.0 - threshold)
    return _finish(
        direction, inputs, horizon, horizon_steps, threshold, intermediates,
        l1, k1, "EM-SDDE", remedy,
    )


def transfer_emsdde_to_sdde(
    start: StabilityParams,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    step: float,
    delta_conf: float,
) -> CertReport:
    """Envelope of the delay scheme implies one for the delay equation.

    Small parameter: the step; the threshold equals ``delta_conf`` exactly
    at step == 0.  The horizon is an exact integer multiple of tau, which
    must be positive here because the target is the delay equation.
    """
    _require(start.kind == "EM-SDDE", "start parameters must have kind 'EM-SDDE'")
    _check_core(p, growth, sigma_hi)
    _pos_finite(lipschitz, "lipschitz")
    tau = _pos_finite(tau, "tau")
    step = _nonneg_finite(step, "step")
    _require(0.0 < delta_conf < 1.0, "delta_conf must lie in (0, 1)")
    direction = "emsdde-to-sdde"
    l1, gam1, k1 = start.prefactor, start.rate, start.offset
    inputs = {
        **_start_echo(start),
        "p": p, "lipschitz": lipschitz, "growth": growth,
        "sigma_hi": sigma_hi, "tau": tau, "step": step,
        "delta_conf": delta_conf,
    }

    lead = 2.0 ** (p - 1.0) * l1 / delta_conf
    if lead < 1.0:
        return _inapplicable(
            direction, inputs, math.nan, None, math.inf, {},
            "confidence offset exceeds 2^{p-1} M; the incoming envelope "
            "already sits below it, so decrease delta_conf",
        )
    horizon_steps = math.floor(math.log(lead) / (gam1 * tau)) + 3
    horizon = horizon_steps * tau
    span = horizon - tau
    thx = _theta_x(p, growth, sigma_hi)
    th5 = _theta_5(p, lipschitz, sigma_hi)
    c = _gap_coef(p, lipschitz, sigma_hi)
    b = _b_factor(p, growth, sigma_hi, tau)
    wrap = _wrap(p, growth, sigma_hi, tau)
    drift = _drift(p, growth, sigma_hi)
    base = 3.0 ** (1.5 * p - 2.0) * growth ** (p / 2.0)

    if step == 0.0:
        amp = 0.0
        d8 = 2.0 ** (p - 1.0) * k1
    else:
        log_pow = (p / 2.0) * math.log(step)
        amp = _exp(
            _log(2.0 ** (p + 2.0) * base * c * b * wrap)
            + 2.0 * thx * span
            + 2.0 * th5 * span
            + log_pow
        )
        # bracket [1 + 4 drift span e^{2 theta_x span}] assembled in log
        # space so a large exponent degrades to +inf, not an exception.
        log_bracket = _logaddexp(0.0, _log(4.0 * drift * span) + 2.0 * thx * span)
        d8 = 2.0 ** (p - 1.0) * k1 + _exp(
            _log(2.0 ** (p + 1.0) * base * c * b)
            + log_pow
            + log_bracket
            + 2.0 * th5 * span
        )
    threshold = delta_conf + amp
    intermediates = {
        "C_p": bdg_constant(p), "theta_x": thx, "theta_5": th5,
        "span": span, "d8": d8,
    }
    remedy = "decrease the step or delta_conf"
    if not (threshold < 1.0):
        return _inapplicable(
            direction, inputs, horizon, horizon_steps, threshold,
            intermediates, f"threshold {threshold:.6g} is not below one; {remedy}",
        )
    lam1 = -math.log(threshold) / horizon
    scale = _exp((thx + lam1) * span)
    lead_f = 1.0 + 2.0 ** (p - 1.0) * l1
    m1 = lead_f * wrap * scale
    # The incoming rate drives the geometric tail of the offsets here.
    d1 = lead_f * (wrap - 1.0) * scale + d8 / (1.0 - _exp(-gam1 * horizon))
    return _finish(
        direction, inputs, horizon, horizon_steps, threshold, intermediates,
        m1, d1, "SDDE", remedy,
    )


_CHAIN_ORDER = ("SDDE", "SDE", "EM-SDE", "EM-SDDE")


def transfer_chain(
    start: StabilityParams,
    *,
    p: float,
    lipschitz: float,
    growth: float,
    sigma_hi: float,
    tau: float,
    step: float,
    delta_conf: float,
    segment_ratio: float = 1.0,
) -> list:
    """Run the full cycle of transfers starting from ``start.kind``.

    Visits SDDE -> SDE -> EM-SDE -> EM-SDDE -> SDDE cyclically (entering
    wherever ``start`` sits) and returns the list of CertReports in order,
    stopping after the first inapplicable one.  A completed cycle ends on
    an envelope of the same kind as ``start``; its prefactor can only have
    grown, since every transfer is a bound.
    """
    _require(start.kind in _CHAIN_ORDER, f"kind must be one of {_CHAIN_ORDER}")
    reports: list = []
    params = start
    idx = _CHAIN_ORDER.index(start.kind)
    for offset in range(4):
        kind = _CHAIN_ORDER[(idx + offset) % 4]
        if kind == "SDDE":
            rep = transfer_sdde_to_sde(
                params, p=p, lipschitz=lipschitz, growth=growth,
                sigma_hi=sigma_hi, tau=tau, delta_conf=delta_conf,
                segment_ratio=segment_ratio,
            )
        elif kind == "SDE":
            rep = transfer_sde_to_emsde(
                params, p=p, lipschitz=lipschitz, growth=growth,
                sigma_hi=sigma_hi, step=step, delta_conf=delta_conf,
            )
        elif kind == "EM-SDE":
            rep = transfer_emsde_to_emsdde(
                params, p=p, lipschitz=lipschitz, growth=growth,
                sigma_hi=sigma_hi, tau=tau, delta_conf=delta_conf,
            )
        else:
            rep = transfer_emsdde_to_sdde(
                params, p=p, lipschitz=lipschitz, growth=growth,
                sigma_hi=sigma_hi, tau=tau, step=step, delta_conf=delta_conf,
            )
        reports.append(rep)
        if not rep.applicable:
            break
        params = rep.derived
    return reports
