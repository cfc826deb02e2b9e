import numpy as np
import pytest

from causalfair.dist import Binning, discretize, from_table, utility_table
from causalfair.errors import GroupMassZeroError, MultiGroupUnsupportedError
from causalfair.fairness import FairnessSpec, solve_fair
from causalfair.pareto import (
    Policy,
    dominance_gap,
    evaluate_policy,
    frontier,
    induced_policy,
    threshold_policy,
)
from causalfair.scm import PathSet, admissions_scm, draw_worlds


def three_atom_dist():
    """Group 0 only, three equal-mass atoms with r = 0, 0.5, 1."""
    rows = [
        (0, 1, 0, 0, 1 / 3),  # r = 0
        (0, 2, 0, 1, 1 / 6),
        (0, 2, 0, 0, 1 / 6),  # together r = 0.5 at bin 2
        (0, 3, 1, 1, 1 / 3),  # r = 1
    ]
    return from_table(rows)


def admissions_dist(n=20000, seed=1):
    scm = admissions_scm()
    pi = PathSet(paths=(("A", "E", "T", "D"),))
    sample = draw_worlds(scm, pi, targets=[0, 1], n=n, seed=seed)
    return discretize(scm, sample, pi, Binning())


class TestThresholdPolicy:
    def test_full_quantile_admits_all(self):
        d = three_atom_dist()
        util = utility_table(d, 0.0)
        tp = threshold_policy(d, util, {0: 1.0})
        pol = induced_policy(d, util, tp)
        np.testing.assert_allclose(pol.d, 1.0)

    def test_zero_quantile_admits_none(self):
        d = three_atom_dist()
        util = utility_table(d, 0.0)
        tp = threshold_policy(d, util, {0: 0.0})
        pol = induced_policy(d, util, tp)
        np.testing.assert_allclose(pol.d, 0.0)

    def test_half_quantile_hand_values(self):
        # Atoms with r in {0, 0.5, 1} and equal mass; q = 0.5 admits the
        # top atom fully and half of the middle one.
        d = three_atom_dist()
        util = utility_table(d, 0.0)
        tp = threshold_policy(d, util, {0: 0.5})
        assert tp.thresholds[0] == pytest.approx(0.5)
        assert tp.at_threshold[0] == pytest.approx(0.5)
        pol = induced_policy(d, util, tp)
        rate = float(np.sum(pol.d * d.mass))
        assert rate == pytest.approx(0.5, abs=1e-12)

    def test_rate_exactness_random_quantiles(self):
        d = admissions_dist(n=5000)
        util = utility_table(d, 0.0)
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = {0: float(rng.uniform(0, 1)), 1: float(rng.uniform(0, 1))}
            tp = threshold_policy(d, util, q)
            pol = induced_policy(d, util, tp)
            for a in (0, 1):
                sel = d.group == a
                rate = float(np.sum(pol.d[sel] * d.mass[sel])) / d.group_mass(a)
                assert rate == pytest.approx(q[a], abs=1e-10)

    def test_threshold_monotone_in_quantile(self):
        d = admissions_dist(n=5000)
        util = utility_table(d, 0.0)
        prev = np.inf
        for q in (0.1, 0.3, 0.5, 0.7, 0.9):
            t = threshold_policy(d, util, {0: q, 1: q}).thresholds[0]
            assert t <= prev
            prev = t

    def test_missing_group(self):
        d = three_atom_dist()
        util = utility_table(d, 0.0)
        with pytest.raises(GroupMassZeroError):
            threshold_policy(d, util, {1: 0.5})


class TestFrontier:
    def test_extreme_share_maximizes_diversity(self):
        d = admissions_dist()
        points = frontier(d, b=0.5, resolution=50)
        best_div = max(pt.diversity for pt in points)
        assert points[-1].share == 1.0
        assert points[-1].diversity == pytest.approx(best_div, abs=1e-12)

    def test_budget_exhausting(self):
        d = admissions_dist()
        b = 0.5
        for pt in frontier(d, b, resolution=25):
            # Reconstruct the policy and check the spent budget equals
            # min(b, admissible mass) for the sweep's quantile split.
            util = utility_table(d, 0.0)
            tp = threshold_policy(d, util, pt.quantiles)
            pol = induced_policy(d, util, tp)
            spent = float(np.sum(pol.d * d.mass))
            expected = sum(
                pt.quantiles[a] * d.group_mass(a) for a in (0, 1)
            )
            assert spent == pytest.approx(expected, abs=1e-12)
            assert spent <= b + 1e-12

    def test_graduation_concave_past_peak(self):
        d = admissions_dist()
        points = frontier(d, b=0.5, resolution=200)
        grads = np.array([pt.graduation for pt in points])
        peak = int(np.argmax(grads))
        after = grads[peak:]
        assert np.all(np.diff(after) <= 1e-12)

    def test_on_frontier_flags(self):
        d = admissions_dist()
        points = frontier(d, b=0.5, resolution=100)
        grads = np.array([pt.graduation for pt in points])
        cut = points[int(np.argmax(grads))].diversity
        for pt in points:
            assert pt.on_frontier == (pt.diversity >= cut - 1e-12)

    def test_single_group_unsupported(self):
        d = three_atom_dist()
        with pytest.raises(MultiGroupUnsupportedError):
            frontier(d, b=0.5, resolution=10)


class TestDominanceGap:
    def test_frontier_point_not_dominated(self):
        d = admissions_dist()
        points = frontier(d, b=0.5, resolution=50)
        grads = np.array([pt.graduation for pt in points])
        pt = points[int(np.argmax(grads))]
        util = utility_table(d, 0.0)
        pol = induced_policy(d, util, threshold_policy(d, util, pt.quantiles))
        assert dominance_gap(pol, d, b=0.5, resolution=50) is None

    def test_constant_policy_dominated(self):
        d = admissions_dist()
        gap = dominance_gap(Policy(d=np.full(d.n, 0.5)), d, b=0.5)
        assert gap is not None
        assert gap[0] > 0 and gap[1] > 0

    def test_adversarial_policy_large_gap(self):
        # Admit only group 0's lowest-graduation bins up to the budget.
        d = admissions_dist()
        util = utility_table(d, 0.0)
        order = np.argsort(util.r + 1e6 * (d.group == 1))
        dd = np.zeros(d.n)
        spent = 0.0
        for i in order:
            take = min(1.0, (0.5 - spent) / d.mass[i])
            if take <= 0:
                break
            dd[i] = take
            spent += take * d.mass[i]
        gap = dominance_gap(Policy(d=dd), d, b=0.5)
        assert gap is not None and min(gap) > 0.01


class TestUtilityEquivariance:
    def test_group_bonus_preserves_within_group_order(self):
        d = admissions_dist(n=5000)
        for lam in (0.0, 0.25, 1.0):
            util = utility_table(d, lam)
            for a in (0, 1):
                sel = d.group == a
                base = utility_table(d, 0.0).u[sel]
                shifted = util.u[sel]
                order = np.argsort(base, kind="stable")
                assert np.all(np.diff(shifted[order]) >= -1e-12)

    def test_unconstrained_lp_matches_sweep(self):
        d = admissions_dist()
        for lam in (0.0, 0.25, 1.0):
            res = solve_fair(d, FairnessSpec(kind="none"), lam=lam, b=0.5)
            best = -np.inf
            for pt in frontier(d, 0.5, resolution=400):
                best = max(best, pt.graduation + lam * pt.diversity)
            assert res.objective >= best - 1e-9
            assert res.objective <= best + 2e-3  # sweep grid resolution
