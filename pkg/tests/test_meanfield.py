import itertools
import math

import numpy as np
import pytest

from lanchnet import TerminationReason, final_state, integrate
from lanchnet.meanfield import (
    MeanFieldSpec,
    balanced_engagement,
    build_engine_scenario,
    integrate_meanfield,
    meanfield_invariant,
    meanfield_rhs,
    optimal_split,
    split_objective,
    victory_factor,
    victory_margin,
)
from lanchnet.model import ConfigError


class TestMeanFieldRhs:
    def test_hand_evaluated_derivatives(self):
        # n=50 split (25, 1, 50): L1=25, L2=1250, L=1275; plug in directly
        spec = MeanFieldSpec(n=50, n1=25, k1=1, k2=50, kappa_R=0.5, kappa_B=1.0)
        dR1, dR2, dB = meanfield_rhs(1.0, 1.0, 1.0, spec)
        assert dR1 == pytest.approx(-1.0 * 1 * 1.0 * 50 / 1275, rel=1e-12)
        assert dR2 == pytest.approx(-1.0 * 50 * 1.0 * 50 / 1275, rel=1e-12)
        assert dB == pytest.approx(
            -0.5 * (25 / 50) * 1.0 - 0.5 * (1250 / 50) * (1 / 50) * 1.0, rel=1e-12
        )
        assert dB == pytest.approx(-0.5, rel=1e-12)

    def test_symmetric_groups_collapse(self):
        spec = MeanFieldSpec(n=10, n1=4, k1=3, k2=3, kappa_R=0.7, kappa_B=1.0)
        dR1, dR2, dB = meanfield_rhs(0.8, 0.8, 0.9, spec)
        assert dR1 == dR2

    def test_no_blue_no_red_losses(self):
        spec = MeanFieldSpec(n=10, n1=5, k1=2, k2=4)
        dR1, dR2, _ = meanfield_rhs(1.0, 1.0, 0.0, spec)
        assert dR1 == 0.0 and dR2 == 0.0

    def test_rejects_empty_attack_set(self):
        with pytest.raises(ConfigError):
            MeanFieldSpec(n=4, n1=2, k1=0, k2=2).validate()


class TestInvariant:
    def test_zero_state(self):
        spec = MeanFieldSpec(n=10, n1=5, k1=2, k2=4)
        assert meanfield_invariant(0.0, 0.0, 0.0, spec) == 0.0

    def test_initial_value_direct_formula(self):
        spec = MeanFieldSpec(n=50, n1=25, k1=1, k2=50, kappa_R=0.5, kappa_B=1.0)
        # L/n^2 = 1275/2500 = 0.51; n1/k1 + n2/k2 = 25 + 0.5 = 25.5
        expected = -0.5 * 0.51 * 25.5 + 1.0
        assert meanfield_invariant(1.0, 1.0, 1.0, spec) == pytest.approx(
            expected, rel=1e-12
        )
        assert expected == pytest.approx(-5.5025)

    @pytest.mark.parametrize(
        "spec",
        [
            MeanFieldSpec(n=10, n1=5, k1=2, k2=4, kappa_R=0.5, kappa_B=1.0),
            MeanFieldSpec(n=50, n1=25, k1=1, k2=50, kappa_R=0.5, kappa_B=1.0),
            MeanFieldSpec(n=12, n1=3, k1=4, k2=6, kappa_R=1.3, kappa_B=0.8),
        ],
    )
    def test_conserved_along_trajectories(self, spec):
        rows = integrate_meanfield(spec, t_max=40.0)
        inv0 = meanfield_invariant(rows[0, 1], rows[0, 2], rows[0, 3], spec)
        drift = max(
            abs(meanfield_invariant(r1, r2, b, spec) - inv0)
            for _, r1, r2, b in rows
        )
        assert drift < 1e-8


class TestOptimalSplit:
    def test_reference_case(self):
        split = optimal_split(50)
        assert (split.n1, split.k1, split.k2) == (25, 1, 50)
        assert split.exact

    def test_smallest_case(self):
        split = optimal_split(2)
        assert (split.n1, split.k1, split.k2) == (1, 1, 2)

    def test_odd_n_flagged(self):
        split = optimal_split(7)
        assert split.n1 == 3
        assert not split.exact

    @pytest.mark.parametrize("n", [4, 6, 8, 10, 12])
    def test_matches_exhaustive_enumeration(self, n):
        best_value, best_args = -1.0, None
        for n1, k1, k2 in itertools.product(
            range(0, n + 1), range(1, n + 1), range(1, n + 1)
        ):
            value = split_objective(k1, k2, n1, n)
            if value > best_value + 1e-12:
                best_value, best_args = value, (n1, k1, k2)
        split = optimal_split(n)
        claimed = split_objective(split.k1, split.k2, split.n1, n)
        assert claimed == pytest.approx(best_value, rel=1e-12)
        # enumeration must land on the claimed split up to group swap
        n1, k1, k2 = best_args
        assert {(n1, k1, k2), (n - n1, k2, k1)} & {
            (split.n1, split.k1, split.k2),
            (n - split.n1, split.k2, split.k1),
        }


class TestVictoryMargin:
    def test_reference_factor_exact(self):
        assert victory_factor(50) == 0.5 + 12.5 + 0.005
        assert victory_factor(50) == 13.005
        margin = victory_margin(50, 1.0, 1.0, 1.0, 1.0, optimized=True)
        assert margin == pytest.approx(12.005, abs=1e-12)

    def test_boundary(self):
        assert victory_margin(10, 0.25, 1.0, 2.0, 1.0, optimized=False) == \
            pytest.approx(0.0, abs=1e-12)

    def test_large_force_fraction_scaling(self):
        # at n=100 the optimised side needs ~2/sqrt(n) of the plain force
        required_fraction = 1.0 / math.sqrt(victory_factor(100))
        assert required_fraction == pytest.approx(2 / math.sqrt(100), abs=0.005)


class TestBalancedEngagement:
    def test_exact_group_degrees(self):
        eng = balanced_engagement(10, 5, 2, 4)
        per_red = eng.sum(axis=0)
        assert per_red[:5].tolist() == [2] * 5
        assert per_red[5:].tolist() == [4] * 5

    def test_balanced_per_blue_when_divisible(self):
        eng = balanced_engagement(10, 5, 2, 4)
        assert eng.sum(axis=1).tolist() == [3] * 10

    def test_near_balanced_otherwise(self):
        eng = balanced_engagement(10, 5, 1, 10)
        loads = eng.sum(axis=1)
        assert loads.max() - loads.min() <= 1


class TestEngineAgreement:
    def test_trajectory_matches_engine_per_group(self):
        # balanced two-group graph: the reduction is exact until the
        # drop-out gates wake up near annihilation
        spec = MeanFieldSpec(n=10, n1=5, k1=2, k2=4, kappa_R=0.5, kappa_B=1.0)
        mf = integrate_meanfield(spec, t_max=50.0, stop_level=0.05)
        traj = integrate(build_engine_scenario(spec), record_every=5)

        times_mf = mf[:, 0]
        checked = 0
        for state in traj.states:
            k = np.searchsorted(times_mf, state.time)
            if k >= times_mf.shape[0] or abs(times_mf[k] - state.time) > 1e-9:
                continue
            r1, r2, b = mf[k, 1], mf[k, 2], mf[k, 3]
            if min(r1, r2, b) < 0.05:
                break
            assert state.red[:5].mean() == pytest.approx(r1, rel=0.01)
            assert state.red[5:].mean() == pytest.approx(r2, rel=0.01)
            assert state.blue.mean() == pytest.approx(b, rel=0.01)
            checked += 1
        assert checked >= 10

    def test_margin_sign_predicts_winner_on_kappa_grid(self):
        # integer-compatible sacrificial split at n=10 (the continuous
        # optimum (n/2, 1, n) needs half a group-1 attacker per Blue, so
        # the invariant-based margin is checked at the nearest feasible
        # split: group 2 attacks everyone, each Blue gets one group-1 duel)
        n, n1, k1, k2 = 10, 5, 2, 10
        f = split_objective(k1, k2, n1, n)
        for kappa_R in (0.1, 0.3, 0.5, 0.7, 0.9):
            for kappa_B in (0.25, 0.5, 1.0, 2.0, 4.0):
                margin = kappa_R * f * 1.0 - kappa_B * 1.0
                spec = MeanFieldSpec(
                    n=n, n1=n1, k1=k1, k2=k2, kappa_R=kappa_R, kappa_B=kappa_B
                )
                _, reason = final_state(build_engine_scenario(spec))
                if margin > 0:
                    assert reason == TerminationReason.ANNIHILATION_BLUE, (
                        kappa_R, kappa_B)
                else:
                    assert reason == TerminationReason.ANNIHILATION_RED, (
                        kappa_R, kappa_B)
