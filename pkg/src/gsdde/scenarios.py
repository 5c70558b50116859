"""Volatility scenarios and the noise increments they induce.

The sublinear (worst-case) expectation is realized numerically by a finite
family of volatility controls: per-step volatilities inside the uncertainty
interval.  Each control, together with a counter-based random stream, yields
one classical probabilistic scenario: Brownian increments dB_n and
deterministic quadratic-variation increments dQV_n = sigma_n^2 * delta.

The family always contains both constant extremes, plus random bang-bang
members that guard against non-constant worst cases.  Taking the max of
sample means over the family under-approximates the true supremum over all
admissible controls; that bias is inherent to any finite family and is not
bounded here.

All randomness is drawn from Philox streams keyed by
(master seed, role, scenario index, path index), so results are bit-identical
for identical keys regardless of worker count or generation order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DelayGrid, GParams

__all__ = [
    "VolatilityControl",
    "NoiseScenario",
    "make_scenario_family",
    "constant_control",
    "sample_increments",
    "refine",
    "save_increments",
    "load_increments",
]

CONTROL_KINDS = ("constant-lo", "constant-hi", "constant-mid", "bang-bang-random")

# Stream roles keep independent uses of the same (seed, scenario, path) key
# from ever colliding.
_ROLE_INCREMENTS = 1
_ROLE_CONTROL = 2
_ROLE_REFINE = 3


def _philox(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class VolatilityControl:
    """Per-step volatility choices sigma_n for n = 0..N-1.

    ``kind`` records how the control was built (one of ``CONTROL_KINDS``).
    """

    sigmas: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        sig = np.asarray(self.sigmas, dtype=float)
        if sig.ndim != 1 or sig.size < 1:
            raise ValueError("sigmas must be a 1-D array with >= 1 step")
        if not np.all(np.isfinite(sig)) or np.any(sig < 0.0):
            raise ValueError("sigmas must be finite and nonnegative")
        if self.kind not in CONTROL_KINDS:
            raise ValueError(f"kind must be one of {CONTROL_KINDS}, got {self.kind!r}")
        sig.setflags(write=False)
        object.__setattr__(self, "sigmas", sig)

    @property
    def steps(self) -> int:
        return self.sigmas.size


@dataclass(frozen=True)
class NoiseScenario:
    """One realized noise path: a control plus the increments it induces.

    ``dqv[n] = sigmas[n]^2 * delta`` exactly (deterministic given the
    control) and ``db[n] = sigmas[n] * sqrt(delta) * Z_n`` with independent
    standard normals Z_n.  ``rng_key`` is (master seed, scenario index,
    path index).
    """

    control: VolatilityControl
    db: np.ndarray
    dqv: np.ndarray
    delta: float
    rng_key: tuple

    def __post_init__(self) -> None:
        db = np.asarray(self.db, dtype=float)
        dqv = np.asarray(self.dqv, dtype=float)
        if db.shape != dqv.shape or db.shape != (self.control.steps,):
            raise ValueError("db and dqv must match the control's step count")
        if not (self.delta > 0.0):
            raise ValueError("delta must be positive")
        db.setflags(write=False)
        dqv.setflags(write=False)
        object.__setattr__(self, "db", db)
        object.__setattr__(self, "dqv", dqv)
        object.__setattr__(self, "rng_key", tuple(int(k) for k in self.rng_key))

    @property
    def steps(self) -> int:
        return self.db.size

    def tail(self, n0: int) -> "NoiseScenario":
        """The scenario restricted to steps n >= n0 (for flow restarts)."""
        if not (0 <= n0 <= self.steps):
            raise ValueError(f"n0 must be in [0, {self.steps}], got {n0}")
        control = VolatilityControl(self.control.sigmas[n0:], self.control.kind)
        return NoiseScenario(control, self.db[n0:], self.dqv[n0:],
                             self.delta, self.rng_key)


def constant_control(sigma: float, steps: int, kind: str = "constant-mid") -> VolatilityControl:
    """A control holding one volatility on every step."""
    return VolatilityControl(np.full(steps, float(sigma)), kind)


def make_scenario_family(
    gp: GParams,
    count: int,
    steps: int,
    seed: int,
) -> list[VolatilityControl]:
    """Build the finite control family approximating the worst case.

    The family always contains the two constant extremes; the remaining
    ``count - 2`` members choose independently between the extremes on every
    step (bang-bang).  A degenerate interval (sigma_lo == sigma_hi) collapses
    the family to a single constant control.

    Parameters
    ----------
    gp : GParams
    count : int
        Requested family size K >= 1.
    steps : int
        Steps per control.
    seed : int
        Master seed; bang-bang choices are drawn from streams keyed by
        (seed, control role, member index).

    Raises
    ------
    ValueError
        If K == 1 while the interval is non-degenerate (the worst-case max
        needs at least both extremes).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if gp.degenerate:
        return [constant_control(gp.sigma_lo, steps, "constant-lo")]
    if count == 1:
        raise ValueError(
            "count=1 cannot cover a non-degenerate interval; need both extremes"
        )
    family = [
        constant_control(gp.sigma_lo, steps, "constant-lo"),
        constant_control(gp.sigma_hi, steps, "constant-hi"),
    ]
    for j in range(count - 2):
        rng = _philox(seed, _ROLE_CONTROL, j)
        hi = rng.integers(0, 2, size=steps).astype(bool)
        sig = np.where(hi, gp.sigma_hi, gp.sigma_lo)
        family.append(VolatilityControl(sig, "bang-bang-random"))
    return family


def sample_increments(
    control: VolatilityControl,
    grid: DelayGrid,
    rng_key: tuple,
) -> NoiseScenario:
    """Draw the Brownian and quadratic-variation increments for one path.

    ``db[n] = sigma_n * sqrt(delta) * Z_n`` with Z_n from the Philox stream
    keyed by ``rng_key = (master seed, scenario index, path index)``;
    ``dqv[n] = sigma_n^2 * delta`` exactly.  Output is bit-identical for
    identical keys.
    """
    n = grid.n_steps
    if control.steps < n:
        raise ValueError(
            f"control provides {control.steps} steps, grid needs {n}"
        )
    seed, scenario_index, path_index = (int(k) for k in rng_key)
    rng = _philox(seed, _ROLE_INCREMENTS, scenario_index, path_index)
    z = rng.standard_normal(n)
    sig = control.sigmas[:n]
    db = sig * np.sqrt(grid.delta) * z
    dqv = sig**2 * grid.delta
    trimmed = VolatilityControl(sig, control.kind)
    return NoiseScenario(trimmed, db, dqv, grid.delta, rng_key)


def refine(scenario: NoiseScenario, factor: int) -> NoiseScenario:
    """Subdivide each step into ``factor`` substeps, preserving coarse sums.

    The fine Brownian increments are conditionally sampled (Brownian bridge):
    independent normals with the substep variance are shifted by a common
    correction so that their per-coarse-step sums reproduce the coarse ``db``
    exactly; the quadratic variation splits equally.  The refinement stream
    is keyed by the scenario's own key plus a dedicated role and the factor,
    so refinement is a pure function of (scenario, factor).

    Parameters
    ----------
    scenario : NoiseScenario
    factor : int
        Substeps per step, >= 1.  ``factor == 1`` returns the input.
    """
    r = int(factor)
    if r < 1:
        raise ValueError("factor must be >= 1")
    if r == 1:
        return scenario
    n = scenario.steps
    fine_delta = scenario.delta / r
    seed, scenario_index, path_index = scenario.rng_key
    rng = _philox(seed, _ROLE_REFINE, scenario_index, path_index, r)
    sig = scenario.control.sigmas
    z = rng.standard_normal((n, r)) * (sig[:, None] * np.sqrt(fine_delta))
    # Bridge correction: distribute each step's sum mismatch equally.
    z += (scenario.db - z.sum(axis=1))[:, None] / r
    fine_sig = np.repeat(sig, r)
    control = VolatilityControl(fine_sig, scenario.control.kind)
    dqv = fine_sig**2 * fine_delta
    return NoiseScenario(control, z.ravel(), dqv, fine_delta, scenario.rng_key)


_MAGIC = b"GSN1"


def save_increments(scenario: NoiseScenario, path) -> None:
    """Write a scenario to a replayable binary dump.

    Layout: 4-byte magic, 4-byte little-endian header length, JSON header
    (rng_key, delta, steps, kind), then sigmas, db, dqv as little-endian
    64-bit floats.
    """
    header = json.dumps(
        {
            "rng_key": list(scenario.rng_key),
            "delta": scenario.delta,
            "steps": scenario.steps,
            "kind": scenario.control.kind,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arr in (scenario.control.sigmas, scenario.db, scenario.dqv):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_increments(path) -> NoiseScenario:
    """Read a scenario written by :func:`save_increments`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not an increment dump (magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        steps = int(header["steps"])
        raw = fh.read(3 * steps * 8)
    arrays = np.frombuffer(raw, dtype="<f8").reshape(3, steps)
    control = VolatilityControl(arrays[0].astype(float), header["kind"])
    return NoiseScenario(
        control,
        arrays[1].astype(float),
        arrays[2].astype(float),
        float(header["delta"]),
        tuple(header["rng_key"]),
    )
