"""Problem definition for delay equations driven by G-Brownian motion.

This module houses the static ingredients of a simulation or certificate
computation: the volatility-uncertainty interval that defines the sublinear
expectation, coefficient systems f, g, h with their Lipschitz and growth
constants, the delay-uniform time grid, and initial segments.

All types are immutable after construction and safe to share across workers.
Vectors use the Euclidean norm throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GParams",
    "CoefficientSystem",
    "LinearSystem",
    "DelayGrid",
    "InitialSegment",
    "H1Report",
    "CoefficientError",
    "g_function",
    "segment_norm",
    "validate_h1",
]

# Coefficient evaluator: maps (x, y) with shape (..., n) each to shape (..., n).
Coefficient = Callable[[np.ndarray, np.ndarray], np.ndarray]


class CoefficientError(ValueError):
    """A coefficient evaluator returned a non-finite or mis-shaped value."""


@dataclass(frozen=True)
class GParams:
    """Volatility uncertainty interval [sigma_lo, sigma_hi].

    The interval defines the sublinear expectation: the driving noise may
    realize any per-step volatility inside it, and moments are taken worst
    case over those realizations.

    Parameters
    ----------
    sigma_lo : float
        Lower volatility bound, >= 0.
    sigma_hi : float
        Upper volatility bound, > 0 and >= sigma_lo.
    """

    sigma_lo: float
    sigma_hi: float

    def __post_init__(self) -> None:
        lo, hi = float(self.sigma_lo), float(self.sigma_hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("volatility bounds must be finite")
        if not (0.0 <= lo <= hi):
            raise ValueError(
                f"need 0 <= sigma_lo <= sigma_hi, got [{lo}, {hi}]"
            )
        if hi <= 0.0:
            raise ValueError("sigma_hi must be positive")
        object.__setattr__(self, "sigma_lo", lo)
        object.__setattr__(self, "sigma_hi", hi)

    @property
    def degenerate(self) -> bool:
        """True when the interval collapses to a single volatility."""
        return self.sigma_lo == self.sigma_hi


def g_function(a: float, gp: GParams) -> float:
    """Evaluate the generator G(a) = (sigma_hi^2 a+ - sigma_lo^2 a-) / 2.

    Parameters
    ----------
    a : float
        Finite argument.
    gp : GParams
        Volatility interval.

    Returns
    -------
    float
        G(a).
    """
    a = float(a)
    if not math.isfinite(a):
        raise ValueError("a must be finite")
    return (gp.sigma_hi**2 * max(a, 0.0) - gp.sigma_lo**2 * max(-a, 0.0)) / 2.0


@dataclass(frozen=True)
class CoefficientSystem:
    """Drift f, quadratic-variation drift g, and diffusion h with constants.

    Evaluators take two arrays shaped (..., dimension) — the current state
    and the delayed state — broadcast over leading axes, and return an array
    of the same shape.  ``lipschitz`` is the global Lipschitz constant L of
    the squared-increment inequality

        |f(x,y) - f(x',y')|^2 <= L (|x-x'|^2 + |y-y'|^2)

    (and likewise for g, h), and ``growth`` is the induced linear-growth
    constant L_hat >= 2 max(L, |f(0,0)|^2 v |g(0,0)|^2 v |h(0,0)|^2).

    Raises
    ------
    CoefficientError
        If an evaluator returns non-finite values at the origin.
    ValueError
        If the declared constants are inconsistent.
    """

    dimension: int
    f: Coefficient
    g: Coefficient
    h: Coefficient
    lipschitz: float
    growth: float

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if not (self.lipschitz > 0.0 and math.isfinite(self.lipschitz)):
            raise ValueError("lipschitz constant must be positive and finite")
        if not (self.growth > 0.0 and math.isfinite(self.growth)):
            raise ValueError("growth constant must be positive and finite")
        origin = np.zeros(self.dimension)
        origin_sq = 0.0
        for name, fn in (("f", self.f), ("g", self.g), ("h", self.h)):
            val = np.asarray(fn(origin, origin), dtype=float)
            if val.shape != (self.dimension,):
                raise CoefficientError(
                    f"{name}(0,0) has shape {val.shape}, expected ({self.dimension},)"
                )
            if not np.all(np.isfinite(val)):
                raise CoefficientError(f"{name}(0,0) is not finite: {val}")
            origin_sq = max(origin_sq, float(val @ val))
        floor = 2.0 * max(self.lipschitz, origin_sq)
        # Small tolerance: the floor itself is computed in floating point.
        if self.growth < floor * (1.0 - 1e-12):
            raise ValueError(
                f"growth constant {self.growth} is below its floor "
                f"2*max(L, |f(0,0)|^2 v |g(0,0)|^2 v |h(0,0)|^2) = {floor}"
            )


def _as_matrix(value, dimension: int, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(value, dtype=float))
    if mat.shape != (dimension, dimension):
        raise ValueError(f"{name} must be {dimension}x{dimension}, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} must be finite")
    return mat


def _as_vector(value, dimension: int, name: str) -> np.ndarray:
    vec = np.atleast_1d(np.asarray(value, dtype=float))
    if vec.shape != (dimension,):
        raise ValueError(f"{name} must have length {dimension}, got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} must be finite")
    return vec


def _spectral_norm(mat: np.ndarray) -> float:
    return float(np.linalg.norm(mat, 2))


@dataclass(frozen=True)
class LinearSystem(CoefficientSystem):
    """Affine coefficient family f(x,y) = A_f x + B_f y + c_f (and g, h alike).

    The Lipschitz constant is computed as the max over the three coefficients
    of ||A||_2^2 + ||B||_2^2 (spectral norms), which satisfies the global
    Lipschitz inequality by Cauchy-Schwarz; the growth constant is its
    induced floor using the offsets.  Nonzero offsets give systems without a
    trivial equilibrium at the origin.

    Build instances with :meth:`from_matrices`.
    """

    a_f: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    b_f: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    c_f: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    a_g: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    b_g: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    c_g: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    a_h: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    b_h: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    c_h: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    @classmethod
    def from_matrices(
        cls,
        *,
        a_f=0.0,
        b_f=0.0,
        c_f=0.0,
        a_g=0.0,
        b_g=0.0,
        c_g=0.0,
        a_h=0.0,
        b_h=0.0,
        c_h=0.0,
        dimension: int | None = None,
    ) -> "LinearSystem":
        """Build the affine system from matrices and offsets.

        Scalar inputs are promoted to the requested dimension (matrices to
        scalar multiples of the identity, offsets to constant vectors); when
        ``dimension`` is omitted it is inferred from the first non-scalar
        input, defaulting to 1.
        """
        raw = dict(a_f=a_f, b_f=b_f, c_f=c_f, a_g=a_g, b_g=b_g, c_g=c_g,
                   a_h=a_h, b_h=b_h, c_h=c_h)
        if dimension is None:
            dimension = 1
            for val in raw.values():
                arr = np.asarray(val, dtype=float)
                if arr.ndim >= 1:
                    dimension = arr.shape[0]
                    break
        mats = {}
        for key, val in raw.items():
            arr = np.asarray(val, dtype=float)
            if key.startswith("c_"):
                if arr.ndim == 0:
                    arr = np.full(dimension, float(arr))
                mats[key] = _as_vector(arr, dimension, key)
            else:
                if arr.ndim == 0:
                    arr = float(arr) * np.eye(dimension)
                mats[key] = _as_matrix(arr, dimension, key)

        lipschitz = max(
            _spectral_norm(mats[f"a_{c}"]) ** 2 + _spectral_norm(mats[f"b_{c}"]) ** 2
            for c in "fgh"
        )
        if lipschitz <= 0.0:
            # A fully zero linear part is still Lipschitz; use a tiny positive
            # constant so downstream formulas (which require L > 0) are defined.
            lipschitz = 1e-30
        origin_sq = max(float(mats[f"c_{c}"] @ mats[f"c_{c}"]) for c in "fgh")
        growth = 2.0 * max(lipschitz, origin_sq)

        def make_affine(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> Coefficient:
            def affine(x: np.ndarray, y: np.ndarray) -> np.ndarray:
                return x @ a.T + y @ b.T + c

            return affine

        return cls(
            dimension=dimension,
            f=make_affine(mats["a_f"], mats["b_f"], mats["c_f"]),
            g=make_affine(mats["a_g"], mats["b_g"], mats["c_g"]),
            h=make_affine(mats["a_h"], mats["b_h"], mats["c_h"]),
            lipschitz=lipschitz,
            growth=growth,
            **mats,
        )


@dataclass(frozen=True)
class DelayGrid:
    """Uniform time grid with step delta = tau / m.

    Grid times are t_n = n * delta for n >= -m, computed by multiplication
    (never by repeated addition, so there is no accumulated drift).  The
    horizon must be an integer multiple of delta.

    Parameters
    ----------
    tau : float
        Delay, > 0 (time units).
    m : int
        Steps per delay, >= 1.
    horizon : float
        Final time T > 0; must equal ``n_steps * delta`` for an integer
        ``n_steps`` (validated to within 1e-9 relative and then snapped).
    """

    tau: float
    m: int
    horizon: float

    def __post_init__(self) -> None:
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        object.__setattr__(self, "m", int(self.m))
        if not (self.horizon > 0.0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        delta = self.tau / self.m
        steps = round(self.horizon / delta)
        if steps < 1 or abs(steps * delta - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError(
                f"horizon {self.horizon} is not an integer multiple of delta {delta}"
            )
        object.__setattr__(self, "horizon", steps * delta)

    @property
    def delta(self) -> float:
        """Step size tau / m (always derived, never stored independently)."""
        return self.tau / self.m

    @property
    def n_steps(self) -> int:
        """Number of steps from t=0 to the horizon."""
        return round(self.horizon / self.delta)

    def times(self, include_segment: bool = False) -> np.ndarray:
        """Grid times t_n = n * delta.

        Parameters
        ----------
        include_segment : bool
            When True, start at n = -m (the initial-segment window),
            otherwise at n = 0.
        """
        start = -self.m if include_segment else 0
        return np.arange(start, self.n_steps + 1) * self.delta


@dataclass(frozen=True)
class InitialSegment:
    """Initial data on the segment [-tau, 0], stored at grid points.

    ``values[i]`` is the state at time (i - m) * delta for i = 0..m, where
    m = len(values) - 1.  Between grid points the segment is interpolated
    linearly; the discrete schemes only ever read grid points, so the
    interpolation affects plotting only.
    """

    values: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        if vals.ndim != 2 or vals.shape[0] < 2:
            raise ValueError("segment needs values at >= 2 grid points, shape (m+1, n)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("segment values must be finite")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        """Number of grid steps spanning the segment."""
        return self.values.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, value, tau: float, m: int) -> "InitialSegment":
        """Segment identically equal to ``value`` (scalar or vector)."""
        vec = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.tile(vec, (m + 1, 1)), tau)

    @classmethod
    def from_function(cls, func, tau: float, m: int) -> "InitialSegment":
        """Sample ``func(theta)`` at theta = (i - m) * tau / m for i = 0..m."""
        delta = tau / m
        rows = [np.atleast_1d(np.asarray(func((i - m) * delta), dtype=float))
                for i in range(m + 1)]
        return cls(np.stack(rows), tau)

    @classmethod
    def ramp(cls, start, end, tau: float, m: int) -> "InitialSegment":
        """Linear ramp from ``start`` at theta = -tau to ``end`` at theta = 0."""
        a = np.atleast_1d(np.asarray(start, dtype=float))
        b = np.atleast_1d(np.asarray(end, dtype=float))
        w = np.linspace(0.0, 1.0, m + 1)[:, None]
        return cls((1.0 - w) * a + w * b, tau)

    def at(self, theta: float) -> np.ndarray:
        """Linearly interpolated segment value at theta in [-tau, 0]."""
        if not (-self.tau - 1e-12 <= theta <= 1e-12):
            raise ValueError(f"theta {theta} outside [-tau, 0]")
        pos = (theta + self.tau) / (self.tau / self.m)
        lo = min(max(int(math.floor(pos)), 0), self.m)
        hi = min(lo + 1, self.m)
        w = pos - lo
        return (1.0 - w) * self.values[lo] + w * self.values[hi]


def segment_norm(xi: InitialSegment, p: float) -> float:
    """Worst p-th moment of a deterministic initial segment.

    Computed as the max over segment grid points of |xi(t_n)|^p (Euclidean
    norm).  This is a grid approximation of the segment supremum; the
    discrete schemes only read grid points.  For randomly sampled segments,
    apply the worst-case moment estimator to the per-point samples and take
    the same grid max.

    Parameters
    ----------
    xi : InitialSegment
    p : float
        Moment order, >= 2.

    Returns
    -------
    float
        max_n |xi(t_n)|^p.
    """
    if p < 2.0:
        raise ValueError("moment order p must be >= 2")
    norms_sq = np.einsum("ij,ij->i", xi.values, xi.values)
    return float(np.max(norms_sq ** (p / 2.0)))


@dataclass(frozen=True)
class H1Report:
    """Result of sampling-based validation of the Lipschitz inequality.

    ``ratios`` holds the empirical max of
    |c(x,y) - c(x',y')|^2 / (|x-x'|^2 + |y-y'|^2) per coefficient c.
    """

    declared_lipschitz: float
    ratios: dict
    passed: bool
    samples: int
    box: float

    @property
    def empirical_max(self) -> float:
        return max(self.ratios.values())


def validate_h1(
    sys: CoefficientSystem,
    samples: int = 1000,
    seed: int = 0,
    box: float = 10.0,
) -> H1Report:
    """Check the declared Lipschitz constant on random point pairs.

    Draws ``samples`` pairs (x, y), (x', y') uniformly from [-box, box]^n and
    compares the empirical squared-increment ratios of f, g, h against the
    declared constant.  This is a sampling-based check: it can expose a
    misdeclared constant but cannot prove the global inequality.

    Raises
    ------
    CoefficientError
        If a coefficient returns a non-finite value; the message names the
        offending coefficient and evaluation point.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    n = sys.dimension
    pts = rng.uniform(-box, box, size=(samples, 4, n))
    x, y, x2, y2 = pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]
    denom = np.einsum("ij,ij->i", x - x2, x - x2) + np.einsum("ij,ij->i", y - y2, y - y2)
    keep = denom > 0.0
    ratios = {}
    for name, fn in (("f", sys.f), ("g", sys.g), ("h", sys.h)):
        va = np.asarray(fn(x, y), dtype=float)
        vb = np.asarray(fn(x2, y2), dtype=float)
        for label, arr, px, py in (("", va, x, y), ("'", vb, x2, y2)):
            bad = ~np.all(np.isfinite(arr), axis=-1)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise CoefficientError(
                    f"{name}(x{label}, y{label}) is non-finite at "
                    f"x={px[i]}, y={py[i]}"
                )
        diff = va - vb
        num = np.einsum("ij,ij->i", diff, diff)
        ratios[name] = float(np.max(num[keep] / denom[keep])) if np.any(keep) else 0.0
    passed = max(ratios.values()) <= sys.lipschitz * (1.0 + 1e-9)
    return H1Report(
        declared_lipschitz=sys.lipschitz,
        ratios=ratios,
        passed=passed,
        samples=samples,
        box=box,
    )
