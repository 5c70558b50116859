"""Closed-form constants, bounds, and stability-transfer tests."""

import math

import numpy as np
import pytest

import formula_oracle as fo
from gsdde.certify import (
    GAP_MODES,
    GLOSSARY,
    CertReport,
    StabilityParams,
    bdg_constant,
    delay_diff_bound,
    delay_diff_constants,
    em_onestep_constant_sde,
    gap_bound,
    lemma_bound_sdde,
    lemma_bound_sde,
    odd_moment_constant,
    transfer_chain,
    transfer_emsde_to_emsdde,
    transfer_emsdde_to_sdde,
    transfer_sdde_to_sde,
    transfer_sde_to_emsde,
)

START = StabilityParams(prefactor=2.0, rate=1.0, offset=0.05, kind="SDDE")
CORE = dict(p=2.0, lipschitz=0.02, growth=0.08, sigma_hi=0.1, delta_conf=0.5)
APPLICABLE_TAU = 0.005  # small enough that the delay transfer certifies


class TestConstants:
    def test_frozen_values(self):
        assert bdg_constant(2.0) == pytest.approx(4.0, rel=1e-12)
        assert bdg_constant(4.0) == pytest.approx(359.59396433470507, rel=1e-12)
        assert odd_moment_constant(2.0) == pytest.approx(3.0, rel=1e-12)
        assert odd_moment_constant(4.0) == pytest.approx(105.0, rel=1e-12)

    def test_oracle_spot_checks(self):
        for p in (2.0, 2.5, 3.0, 4.0):
            assert bdg_constant(p) == pytest.approx(
                float(fo.o_bdg_constant(p)), rel=1e-12
            )
            assert odd_moment_constant(p) == pytest.approx(
                float(fo.o_odd_moment_constant(p)), rel=1e-12
            )

    def test_p_below_two_rejected(self):
        with pytest.raises(ValueError):
            bdg_constant(1.5)
        with pytest.raises(ValueError):
            odd_moment_constant(1.0)


class TestBounds:
    def test_lemma_bounds_monotone_in_span(self):
        lo = lemma_bound_sdde(2.0, 1.0, 1.0, 0.5, 1.0, 0.5)
        hi = lemma_bound_sdde(2.0, 1.0, 1.0, 0.5, 1.0, 1.0)
        assert 0.0 < lo < hi
        lo2 = lemma_bound_sde(2.0, 1.0, 1.0, 1.0, 0.5)
        hi2 = lemma_bound_sde(2.0, 1.0, 1.0, 1.0, 1.0)
        assert 0.0 < lo2 < hi2

    def test_delay_diff_windows(self):
        args = (2.0, 1.0, 1.0, 0.25, 2.0, 1.0)
        post = delay_diff_bound(*args, window="post-delay")
        init = delay_diff_bound(*args, window="initial")
        opost = float(fo.o_delay_diff_bound(*args, window="post-delay"))
        oinit = float(fo.o_delay_diff_bound(*args, window="initial"))
        assert post == pytest.approx(opost, rel=1e-12)
        assert init == pytest.approx(oinit, rel=1e-12)
        with pytest.raises(ValueError):
            delay_diff_bound(*args, window="sideways")

    def test_gap_modes_match_oracle(self):
        common = dict(p=2.0, lipschitz=0.3, growth=1.0, sigma_hi=0.8, span=1.0)
        got = gap_bound("sdde-sde", tau=0.1, seg_norm=1.0, **common)
        want = float(fo.o_gap_sdde_sde(
            2.0, 0.3, 1.0, 0.8, tau=0.1, seg_norm=1.0, span=1.0
        ))
        assert got == pytest.approx(want, rel=1e-12)
        got = gap_bound("sde-emsde", step=0.05, init_moment=1.0, **common)
        want = float(fo.o_gap_sde_emsde(
            2.0, 0.3, 1.0, 0.8, step=0.05, init_moment=1.0, span=1.0
        ))
        assert got == pytest.approx(want, rel=1e-12)
        with pytest.raises(ValueError):
            gap_bound("nonsense", **common)
        assert set(GAP_MODES) == {
            "sdde-sde", "sde-emsde", "emsdde-emsde", "sdde-emsdde"
        }

    def test_em_onestep_positive(self):
        assert em_onestep_constant_sde(2.0, 1.0, 1.0, 1.0) == pytest.approx(
            11.196152422706632, rel=1e-12
        )


class TestStabilityParams:
    def test_envelope_evaluation(self):
        params = StabilityParams(2.0, 1.0, 0.25, "SDDE")
        assert params.envelope(0.0, 3.0) == 6.25
        t = np.array([0.0, 1.0])
        np.testing.assert_allclose(
            params.envelope(t, 1.0), 2.0 * np.exp(-t) + 0.25
        )

    def test_basis_by_kind(self):
        assert StabilityParams(1.0, 1.0, 0.0, "SDDE").basis == "segment-sup"
        assert StabilityParams(1.0, 1.0, 0.0, "EM-SDDE").basis == "segment-sup"
        assert StabilityParams(1.0, 1.0, 0.0, "SDE").basis == "initial-point"
        assert StabilityParams(1.0, 1.0, 0.0, "EM-SDE").basis == "initial-point"

    def test_validation(self):
        with pytest.raises(ValueError):
            StabilityParams(-1.0, 1.0, 0.0, "SDDE")
        with pytest.raises(ValueError):
            StabilityParams(1.0, 0.0, 0.0, "SDDE")
        with pytest.raises(ValueError):
            StabilityParams(1.0, 1.0, -0.1, "SDDE")
        with pytest.raises(ValueError):
            StabilityParams(1.0, 1.0, 0.0, "ODE")


class TestZeroParameterLimit:
    def test_threshold_is_confidence_offset_exactly(self):
        r = transfer_sdde_to_sde(START, tau=0.0, **CORE)
        assert r.threshold == CORE["delta_conf"]
        sde = StabilityParams(2.0, 1.0, 0.05, "SDE")
        u = transfer_sde_to_emsde(sde, step=0.0, **CORE)
        assert u.threshold == CORE["delta_conf"]
        emsde = StabilityParams(2.0, 1.0, 0.05, "EM-SDE")
        v = transfer_emsde_to_emsdde(emsde, tau=0.0, **CORE)
        assert v.threshold == CORE["delta_conf"]

    def test_w_requires_positive_tau(self):
        emsdde = StabilityParams(2.0, 1.0, 0.05, "EM-SDDE")
        with pytest.raises(ValueError):
            transfer_emsdde_to_sdde(emsdde, tau=0.0, step=0.0, **CORE)


class TestTransferIdentities:
    def test_rate_threshold_identity(self):
        r = transfer_sdde_to_sde(START, tau=APPLICABLE_TAU, **CORE)
        assert r.applicable
        assert math.exp(-r.rate * r.horizon) == pytest.approx(
            r.threshold, rel=1e-12
        )
        assert r.derived.rate == r.rate

    def test_offset_geometric_identity(self):
        r = transfer_sdde_to_sde(START, tau=APPLICABLE_TAU, **CORE)
        d3 = r.intermediates["d3"]
        assert r.derived.offset == pytest.approx(
            d3 / (1.0 - r.threshold), rel=1e-12
        )

    def test_matches_oracle_transfer(self):
        r = transfer_sdde_to_sde(START, tau=APPLICABLE_TAU, **CORE)
        want = fo.o_transfer_sdde_to_sde(
            2.0, 1.0, 0.05, CORE["p"], CORE["lipschitz"], CORE["growth"],
            CORE["sigma_hi"], APPLICABLE_TAU, CORE["delta_conf"],
        )
        assert r.horizon == pytest.approx(float(want["horizon"]), rel=1e-12)
        assert r.threshold == pytest.approx(float(want["threshold"]), rel=1e-12)
        assert r.derived.prefactor == pytest.approx(
            float(want["prefactor"]), rel=1e-12
        )

    def test_monotone_threshold_in_small_parameter(self):
        taus = np.geomspace(1e-4, 0.05, 12)
        vals = [
            transfer_sdde_to_sde(START, tau=float(t), **CORE).threshold
            for t in taus
        ]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        assert all(v > CORE["delta_conf"] for v in vals)

    def test_horizon_steps_counting(self):
        sde = StabilityParams(2.0, 1.0, 0.05, "SDE")
        u = transfer_sde_to_emsde(sde, step=0.001, **CORE)
        lead = 2.0 ** (CORE["p"] - 1.0) * 2.0 / CORE["delta_conf"]
        n0 = math.floor(math.log(lead) / (1.0 * 0.001))
        assert u.horizon_steps == n0 + 1
        # The smooth horizon covers the stepped window it counts.
        assert u.horizon == pytest.approx(math.log(lead) / 1.0 + 0.001, rel=1e-12)
        assert u.horizon >= u.horizon_steps * 0.001

    def test_em_thresholds_monotone_in_small_parameter(self):
        sde = StabilityParams(2.0, 1.0, 0.05, "SDE")
        steps = np.linspace(0.005, 0.1, 20)
        vals = [
            transfer_sde_to_emsde(sde, step=float(s), **CORE).threshold
            for s in steps
        ]
        assert all(a < b for a, b in zip(vals, vals[1:]))
        emsde = StabilityParams(2.0, 1.0, 0.05, "EM-SDE")
        vals = [
            transfer_emsde_to_emsdde(emsde, tau=float(t), **CORE).threshold
            for t in steps
        ]
        assert all(a < b for a, b in zip(vals, vals[1:]))


class TestInapplicability:
    def test_lead_below_one_names_confidence_offset(self):
        small = StabilityParams(0.1, 1.0, 0.0, "SDDE")
        r = transfer_sdde_to_sde(small, tau=0.01, **dict(CORE, delta_conf=0.9))
        assert not r.applicable
        assert r.derived is None
        assert "confidence offset exceeds 2^{p-1} M" in r.reason
        assert "decrease delta_conf" in r.reason

    def test_large_parameter_reports_threshold(self):
        r = transfer_sdde_to_sde(
            START, tau=0.5, **dict(CORE, lipschitz=2.0, growth=8.0, sigma_hi=1.0)
        )
        assert not r.applicable
        assert "is not below one" in r.reason
        assert "decrease" in r.reason
        assert r.rate is None

    def test_json_dict_shape(self):
        r = transfer_sdde_to_sde(START, tau=APPLICABLE_TAU, **CORE)
        d = r.to_json_dict()
        assert list(d) == [
            "direction", "applicable", "threshold", "horizon",
            "horizon_steps", "rate", "derived", "reason", "inputs",
            "intermediates",
        ]
        assert d["direction"] == "sdde-to-sde"
        assert d["derived"]["kind"] == "SDE"
        assert d["derived"]["basis"] == "initial-point"
        assert list(d["intermediates"]) == sorted(d["intermediates"])


class TestChain:
    def test_chain_visits_cycle_in_order(self):
        reports = transfer_chain(
            START, p=2.0, lipschitz=0.02, growth=0.08, sigma_hi=0.1,
            tau=0.01, step=0.002, delta_conf=0.5,
        )
        directions = [r.direction for r in reports]
        expected = [
            "sdde-to-sde", "sde-to-emsde", "emsde-to-emsdde",
            "emsdde-to-sdde",
        ]
        assert directions == expected[: len(directions)]
        for i, rep in enumerate(reports):
            if rep.applicable:
                assert rep.derived is not None
            else:
                assert i == len(reports) - 1  # halts at first failure

    def test_chain_enters_mid_cycle(self):
        sde = StabilityParams(2.0, 1.0, 0.05, "SDE")
        reports = transfer_chain(
            sde, p=2.0, lipschitz=0.02, growth=0.08, sigma_hi=0.1,
            tau=0.01, step=0.002, delta_conf=0.5,
        )
        assert reports[0].direction == "sde-to-emsde"

    def test_chain_stops_at_first_inapplicable(self):
        reports = transfer_chain(
            START, p=2.0, lipschitz=1.0, growth=4.0, sigma_hi=1.0,
            tau=0.2, step=0.05, delta_conf=0.5,
        )
        assert not reports[-1].applicable
        assert all(r.applicable for r in reports[:-1])
        assert len(reports) <= 4


class TestGlossary:
    def test_core_terms_present(self):
        for key in (
            "p", "lipschitz", "growth", "sigma_hi", "tau", "step",
            "delta_conf", "prefactor", "rate", "offset", "horizon",
            "threshold",
        ):
            assert key in GLOSSARY
            assert GLOSSARY[key]
