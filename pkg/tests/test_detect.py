"""Envelope-fitting tests: roundtrips, verdicts, dominance."""

import numpy as np
import pytest

from gsdde.detect import (
    FITTED_VERDICT,
    NO_DECAY_VERDICT,
    FitConfig,
    fit_practical_stability,
    verify_envelope,
)


def synth(m=3.0, lam=2.0, d=0.01, basis=1.0, t_max=6.0, n=400):
    t = np.linspace(0.0, t_max, n)
    return t, m * basis * np.exp(-lam * t) + d


class TestRoundtrip:
    def test_noiseless_recovery(self):
        # A horizon long enough that the tail is pure offset, and a start
        # value high enough that the whole decay window sits far above
        # both the log floor and the tail contamination, make the
        # offset-first fit essentially exact.
        basis = 10.0
        t, v = synth(m=1e5, lam=2.0, d=0.01, basis=basis, t_max=30.0, n=1200)
        fit = fit_practical_stability((t, v), basis, "SDDE")
        assert fit.decaying and fit.verdict == FITTED_VERDICT
        assert fit.params.prefactor == pytest.approx(1e5, rel=1e-6)
        assert fit.params.rate == pytest.approx(2.0, rel=1e-6)
        assert fit.params.offset == pytest.approx(0.01, rel=1e-6)
        assert fit.r_squared > 0.999

    def test_basis_normalization(self):
        t, v = synth(m=2e5, lam=1.5, d=0.0, basis=10.0, t_max=40.0, n=1600)
        fit = fit_practical_stability((t, v), 10.0, "SDE")
        assert fit.params.prefactor == pytest.approx(2e5, rel=1e-6)
        double = fit_practical_stability((t, v), 20.0, "SDE")
        assert double.params.prefactor == pytest.approx(1e5, rel=1e-6)
        assert double.params.rate == pytest.approx(fit.params.rate, rel=1e-9)

    def test_kind_assigned_to_params(self):
        t, v = synth()
        fit = fit_practical_stability((t, v), 1.0, "EM-SDDE")
        assert fit.params.kind == "EM-SDDE"
        assert fit.kind == "EM-SDDE"
        assert fit.params.basis == "segment-sup"


class TestVerdicts:
    def test_flat_curve_refuses(self):
        t = np.linspace(0.0, 5.0, 50)
        fit = fit_practical_stability((t, np.full_like(t, 2.0)), 1.0, "SDDE")
        assert not fit.decaying
        assert fit.params is None
        assert fit.verdict == NO_DECAY_VERDICT

    def test_rising_curve_refuses(self):
        t = np.linspace(0.0, 5.0, 50)
        fit = fit_practical_stability((t, 1.0 + t**2), 1.0, "SDE")
        assert not fit.decaying
        assert fit.params is None


class TestDominance:
    def test_envelope_dominates_noisy_curve(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            t = np.linspace(0.0, 5.0, 300)
            clean = 2.0 * np.exp(-1.5 * t) + 0.05
            noisy = clean * np.exp(rng.normal(0.0, 0.05, t.size))
            fit = fit_practical_stability((t, noisy), 1.0, "SDDE")
            assert fit.decaying
            ok, worst = verify_envelope((t, noisy), fit.params, 1.0)
            assert ok, f"trial {trial}: slack {worst}"
            assert worst >= 0.0

    def test_inflation_diagnostics(self):
        t, v = synth(n=500)
        fit = fit_practical_stability((t, v), 1.0, "SDDE")
        assert fit.prefactor_inflation >= 1.0
        assert fit.offset_inflation >= 0.0
        assert fit.raw_prefactor > 0
        assert fit.raw_rate > 0

    def test_verify_detects_violation(self):
        t, v = synth(m=3.0, lam=2.0, d=0.01)
        fit = fit_practical_stability((t, v), 1.0, "SDDE")
        bumped = v.copy()
        bumped[10] *= 10.0
        ok, worst = verify_envelope((t, bumped), fit.params, 1.0)
        assert not ok
        assert worst < 0.0


class TestValidation:
    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_practical_stability(
                (np.array([0.0, 1.0, 2.0]), np.array([3.0, 2.0, 1.0])),
                1.0,
                "SDDE",
            )

    def test_non_monotone_times(self):
        t = np.array([0.0, 1.0, 0.5, 2.0, 3.0])
        with pytest.raises(ValueError):
            fit_practical_stability((t, np.exp(-t)), 1.0, "SDDE")

    def test_bad_basis(self):
        t, v = synth()
        with pytest.raises(ValueError):
            fit_practical_stability((t, v), 0.0, "SDDE")
        with pytest.raises(ValueError):
            fit_practical_stability((t, v), -1.0, "SDDE")

    def test_bad_kind(self):
        t, v = synth()
        with pytest.raises(ValueError):
            fit_practical_stability((t, v), 1.0, "PDE")

    def test_bad_config(self):
        with pytest.raises(ValueError):
            FitConfig(tail_fraction=0.0)
        with pytest.raises(ValueError):
            FitConfig(decay_window=(0.7, 0.2))
        with pytest.raises(ValueError):
            FitConfig(log_floor=0.0)
