import numpy as np
import pytest

from causalfair.dist import (
    Binning,
    build_distribution,
    discretize,
    from_table,
    load_tables,
    transition_matrix,
    utility_table,
    write_tables,
)
from causalfair.errors import (
    EmptyInputError,
    InconsistentMassError,
    NegativeMassError,
    ZeroMassError,
    ZeroRowError,
)
from causalfair.scm import PathSet, admissions_scm, draw_worlds


def tiny_dist():
    """Two points, equal mass, deterministic outcomes, swap counterfactual."""
    rows = [
        (0, 10, 0, 1, 0.5),
        (1, 20, 1, 1, 0.5),
    ]
    cf_rows = [
        (1, 0, 10, 1, 20, 0.5),
        (1, 1, 20, 1, 20, 0.5),
    ]
    return from_table(rows, cf_rows)


class TestBinning:
    def test_basic_indexing(self):
        b = Binning(width=1.0, lo=0.0, hi=100.0)
        idx = b.index(np.array([-3.0, 0.0, 0.4, 59.0, 99.5, 100.0, 250.0]))
        np.testing.assert_array_equal(idx, [0, 0, 0, 59, 99, 99, 99])

    def test_width_two(self):
        b = Binning(width=2.0, lo=0.0, hi=10.0)
        np.testing.assert_array_equal(b.index(np.array([0.0, 1.9, 2.0, 10.0])), [0, 0, 1, 4])

    def test_bad_width(self):
        with pytest.raises(ValueError):
            Binning(width=0.0)


class TestBuildDistribution:
    def test_single_draw(self):
        d = build_distribution(
            group=np.array([1]),
            bin_index=np.array([59]),
            y0=np.array([1]),
            y1=np.array([1]),
            cf={0: (np.array([1]), np.array([59]))},
        )
        assert d.n == 1
        assert d.mass[0] == 1.0
        assert d.outcome_mass[0, 1, 1] == 1.0
        assert d.cf_mass[0][0, 0] == 1.0

    def test_aggregation(self):
        # Three draws, two in the same cell.
        d = build_distribution(
            group=np.array([0, 0, 1]),
            bin_index=np.array([5, 5, 7]),
            y0=np.array([0, 1, 0]),
            y1=np.array([1, 1, 0]),
            cf={},
        )
        assert d.n == 2
        np.testing.assert_allclose(np.sort(d.mass), [1 / 3, 2 / 3])
        assert d.mass.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(d.outcome_mass.sum(axis=(1, 2)), d.mass)

    def test_empty_raises(self):
        with pytest.raises(EmptyInputError):
            build_distribution(np.array([]), np.array([]), np.array([]), np.array([]), {})

    def test_cf_snaps_to_nearest_observed_bin(self):
        # Counterfactual bin 9 was never observed; nearest factual bin in
        # group 0 is 8, so the mass lands there and row sums stay exact.
        d = build_distribution(
            group=np.array([0, 0]),
            bin_index=np.array([3, 8]),
            y0=np.array([0, 0]),
            y1=np.array([0, 0]),
            cf={1: (np.array([0, 0]), np.array([3, 9]))},
        )
        rows = d.cf_mass[1].sum(axis=1)
        np.testing.assert_allclose(rows, d.mass)
        j8 = int(np.flatnonzero(d.bin == 8)[0])
        assert d.cf_mass[1][j8, j8] == pytest.approx(0.5)


class TestFromTable:
    def test_normalization(self):
        d = from_table([(0, 1, 0, 0, 2.0), (1, 2, 1, 1, 2.0)])
        np.testing.assert_allclose(d.mass, [0.5, 0.5])

    def test_zero_total(self):
        with pytest.raises(ZeroMassError):
            from_table([(0, 1, 0, 0, 0.0)])

    def test_negative_mass(self):
        with pytest.raises(NegativeMassError):
            from_table([(0, 1, 0, 0, -1.0)])

    def test_cf_row_unknown_point(self):
        with pytest.raises(InconsistentMassError):
            from_table([(0, 1, 0, 0, 1.0)], [(1, 0, 1, 0, 99, 1.0)])

    def test_cf_row_sums_checked(self):
        with pytest.raises(InconsistentMassError):
            from_table(
                [(0, 1, 0, 0, 1.0), (0, 2, 0, 0, 1.0)],
                [(1, 0, 1, 0, 1, 1.0)],  # second row has no counterfactual mass
            )


class TestTransitionMatrix:
    def test_identity_when_cf_equals_factual(self):
        rows = [(0, 1, 0, 0, 0.25), (1, 2, 0, 0, 0.75)]
        cf_rows = [(0, 0, 1, 0, 1, 0.25), (0, 1, 2, 1, 2, 0.75)]
        d = from_table(rows, cf_rows)
        np.testing.assert_allclose(transition_matrix(d, 0), np.eye(2))

    def test_deterministic_swap(self):
        d = tiny_dist()
        p = transition_matrix(d, 1)
        np.testing.assert_allclose(p, [[0.0, 1.0], [0.0, 1.0]])

    def test_rows_stochastic(self):
        d = tiny_dist()
        np.testing.assert_allclose(transition_matrix(d, 1).sum(axis=1), 1.0)


class TestUtilityTable:
    def test_hand_values(self):
        # Point 0: Pr(Y(1)=1 | x) = 1, group 0. Point 1: same but group 1.
        d = tiny_dist()
        t = utility_table(d, lam=0.25)
        np.testing.assert_allclose(t.r, [1.0, 1.0])
        np.testing.assert_allclose(t.u, [1.0, 1.25])

    def test_lambda_zero(self):
        d = tiny_dist()
        t = utility_table(d, lam=0.0)
        np.testing.assert_allclose(t.u, t.r)

    def test_mixed_outcomes(self):
        d = from_table([(0, 1, 0, 0, 0.25), (0, 1, 0, 1, 0.25), (1, 5, 1, 1, 0.5)])
        t = utility_table(d, lam=0.25)
        np.testing.assert_allclose(t.r, [0.5, 1.0])

    def test_negative_lambda(self):
        with pytest.raises(ValueError):
            utility_table(tiny_dist(), lam=-0.1)


class TestDiscretize:
    def test_admissions_round_trip_invariants(self):
        scm = admissions_scm()
        pi = PathSet(paths=(("A", "E", "T", "D"),))
        sample = draw_worlds(scm, pi, targets=[0, 1], n=20000, seed=9)
        d = discretize(scm, sample, pi, Binning(width=1.0, lo=0.0, hi=100.0))
        assert d.mass.sum() == pytest.approx(1.0, abs=1e-12)
        for aprime in (0, 1):
            np.testing.assert_allclose(d.cf_mass[aprime].sum(axis=1), d.mass, atol=1e-12)
        # Both groups present, with the smaller group near one third.
        assert d.group_mass(1) == pytest.approx(1 / 3, abs=0.02)

    def test_cf_for_own_group_is_diagonal(self):
        # Draws already in the target group keep their factual bin, so all
        # of that group's counterfactual mass sits on the diagonal.
        scm = admissions_scm()
        pi = PathSet(paths=(("A", "E", "T", "D"),))
        sample = draw_worlds(scm, pi, targets=[1], n=5000, seed=17)
        d = discretize(scm, sample, pi, Binning())
        mat = d.cf_mass[1]
        in_group = d.group == 1
        off_diag = mat[in_group] - np.diag(np.diag(mat))[in_group]
        np.testing.assert_allclose(np.diag(mat)[in_group], d.mass[in_group], atol=1e-12)


class TestCsvRoundTrip:
    def test_write_then_load(self, tmp_path):
        d = tiny_dist()
        mass_path = tmp_path / "mass.csv"
        cf_path = tmp_path / "cf.csv"
        write_tables(d, mass_path, cf_path)
        d2 = load_tables(mass_path, cf_path)
        np.testing.assert_array_equal(d2.group, d.group)
        np.testing.assert_array_equal(d2.bin, d.bin)
        np.testing.assert_allclose(d2.mass, d.mass)
        np.testing.assert_allclose(d2.outcome_mass, d.outcome_mass)
        np.testing.assert_allclose(d2.cf_mass[1], d.cf_mass[1])

    def test_round_trip_tight(self, tmp_path):
        # repr() preserves each float bit for bit; the only drift is the
        # renormalization by the re-accumulated total, which is a single ulp.
        scm = admissions_scm()
        pi = PathSet(paths=(("A", "E", "T", "D"),))
        sample = draw_worlds(scm, pi, targets=[0, 1], n=2000, seed=4)
        d = discretize(scm, sample, pi, Binning())
        mass_path = tmp_path / "mass.csv"
        cf_path = tmp_path / "cf.csv"
        write_tables(d, mass_path, cf_path)
        d2 = load_tables(mass_path, cf_path)
        np.testing.assert_allclose(d2.mass, d.mass, rtol=1e-14, atol=0)
        np.testing.assert_allclose(d2.cf_mass[0], d.cf_mass[0], rtol=1e-14, atol=0)
