"""Finite joint distributions over binned covariates, potential outcomes,
and path-specific counterfactual covariates.

A support point is a (group, bin) pair. All probability tables are stored as
joint masses so downstream constraint builders never divide by small
conditionals: ``mass[i]`` is Pr(X = x_i), ``outcome_mass[i, j0, j1]`` is
Pr(X = x_i, Y(0) = y_j0, Y(1) = y_j1), and ``cf_mass[a'][i, j]`` is
Pr(X = x_i, X_cf(a') = x_j).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import scm as scm_mod
from .errors import (
    EmptyInputError,
    InconsistentMassError,
    NegativeMassError,
    ZeroMassError,
    ZeroRowError,
)

__all__ = [
    "FiniteJointDistribution",
    "UtilityTable",
    "Binning",
    "discretize",
    "build_distribution",
    "from_table",
    "transition_matrix",
    "utility_table",
    "load_tables",
    "write_tables",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Binning:
    width: float = 1.0
    lo: float = 0.0
    hi: float = 100.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bin width must be positive")
        if self.lo >= self.hi:
            raise ValueError("lo must be below hi")

    def index(self, t: np.ndarray) -> np.ndarray:
        clipped = np.clip(t, self.lo, self.hi)
        idx = np.floor((clipped - self.lo) / self.width).astype(np.int64)
        nbins = int(np.ceil((self.hi - self.lo) / self.width))
        return np.minimum(idx, nbins - 1)  # hi lands in the last bin


@dataclass
class FiniteJointDistribution:
    """Finite support with point, outcome, and counterfactual masses."""

    group: np.ndarray  # (n,) int group index per support point
    bin: np.ndarray  # (n,) int covariate bin per support point
    mass: np.ndarray  # (n,) float
    outcome_mass: np.ndarray  # (n, k, k) float over (y0, y1) outcome indices
    outcomes: tuple = (0, 1)
    cf_mass: dict = field(default_factory=dict)  # group value -> (n, n) float
    groups: tuple = ("a0", "a1")

    def __post_init__(self):
        self.group = np.asarray(self.group, dtype=np.int64)
        self.bin = np.asarray(self.bin, dtype=np.int64)
        self.mass = np.asarray(self.mass, dtype=np.float64)
        self.outcome_mass = np.asarray(self.outcome_mass, dtype=np.float64)
        self.validate()

    @property
    def n(self) -> int:
        return len(self.mass)

    def validate(self):
        if self.mass.min(initial=np.inf) < 0 or self.outcome_mass.min(initial=np.inf) < 0:
            raise NegativeMassError("negative probability mass")
        if abs(self.mass.sum() - 1.0) > _SUM_TOL:
            raise InconsistentMassError("point masses do not sum to 1")
        om = self.outcome_mass.sum(axis=(1, 2))
        if np.max(np.abs(om - self.mass)) > _SUM_TOL:
            raise InconsistentMassError("outcome masses do not marginalize to point masses")
        for aprime, cf in self.cf_mass.items():
            if cf.shape != (self.n, self.n):
                raise InconsistentMassError(f"cf_mass[{aprime}] has wrong shape")
            if cf.min(initial=np.inf) < 0:
                raise NegativeMassError("negative counterfactual mass")
            rows = cf.sum(axis=1)
            if np.max(np.abs(rows - self.mass)) > _SUM_TOL:
                raise InconsistentMassError(
                    f"cf_mass[{aprime}] rows do not marginalize to point masses"
                )

    def group_mass(self, a: int) -> float:
        return float(self.mass[self.group == a].sum())

    def y1_joint(self) -> np.ndarray:
        """(n, k) array of Pr(X = x_i, Y(1) = y_j)."""
        return self.outcome_mass.sum(axis=1)

    def y0_joint(self) -> np.ndarray:
        return self.outcome_mass.sum(axis=2)


@dataclass(frozen=True)
class UtilityTable:
    """Per-point utilities u = r + lambda * 1{group = target}."""

    lam: float
    u: np.ndarray
    r: np.ndarray


def build_distribution(
    group: np.ndarray,
    bin_index: np.ndarray,
    y0: np.ndarray,
    y1: np.ndarray,
    cf: dict,
    outcomes=(0, 1),
    groups=("a0", "a1"),
) -> FiniteJointDistribution:
    """Aggregate per-draw arrays into empirical joint masses.

    ``cf`` maps each target group value to a pair of arrays (counterfactual
    group component, counterfactual bin) aligned with the factual draws, so
    counterfactual masses are joint frequencies computed from the same draw.
    """
    n_draws = len(group)
    if n_draws == 0:
        raise EmptyInputError("no draws")
    outcome_index = {y: j for j, y in enumerate(outcomes)}
    k = len(outcomes)

    keys = np.stack([group, bin_index], axis=1)
    support, inverse = np.unique(keys, axis=0, return_inverse=True)
    n = len(support)

    counts = np.bincount(inverse, minlength=n).astype(np.float64)
    om_counts = np.zeros((n, k, k))
    j0 = np.array([outcome_index[v] for v in np.asarray(y0).tolist()])
    j1 = np.array([outcome_index[v] for v in np.asarray(y1).tolist()])
    np.add.at(om_counts, (inverse, j0, j1), 1.0)

    point_of = {(int(g), int(b)): i for i, (g, b) in enumerate(support)}
    # Counterfactual draws can land in a (group, bin) cell never observed
    # factually (a finite-sample tail artifact); snap those to the nearest
    # factually observed bin in the same group so row sums stay exact.
    by_group = {}
    for i, (g, b) in enumerate(support):
        by_group.setdefault(int(g), []).append((int(b), i))

    def locate(g, b):
        hit = point_of.get((g, b))
        if hit is not None:
            return hit
        candidates = by_group.get(g)
        if not candidates:
            raise EmptyInputError(f"counterfactual group {g} never observed factually")
        return min(candidates, key=lambda pair: (abs(pair[0] - b), pair[0]))[1]

    cf_mass = {}
    for aprime, (cf_group, cf_bin) in cf.items():
        mat = np.zeros((n, n))
        cols = np.array([locate(int(g), int(b)) for g, b in zip(cf_group, cf_bin)])
        np.add.at(mat, (inverse, cols), 1.0)
        cf_mass[aprime] = mat / n_draws

    return FiniteJointDistribution(
        group=support[:, 0],
        bin=support[:, 1],
        mass=counts / n_draws,
        outcome_mass=om_counts / n_draws,
        outcomes=tuple(outcomes),
        cf_mass=cf_mass,
        groups=tuple(groups),
    )


def discretize(
    scm: "scm_mod.Scm",
    sample: "scm_mod.WorldSample",
    pi: "scm_mod.PathSet",
    binning: Binning,
) -> FiniteJointDistribution:
    """Bin a Monte Carlo sample into a finite joint distribution.

    The score is the non-group decision parent; counterfactual covariates
    follow the path-specific propagation rule for the decision's inputs.
    """
    score_nodes = [p for p in scm.decision_parents if p != scm.group_node]
    if len(score_nodes) != 1:
        raise ValueError("expected exactly one non-group decision parent")
    score_node = score_nodes[0]

    group = sample.factual[scm.group_node]
    bins = binning.index(sample.factual[score_node])
    y0, y1 = scm_mod.potential_outcomes(scm, sample)

    cf = {}
    for target in sample.counterfactual:
        inputs = scm_mod.counterfactual_covariates(scm, sample, pi, target)
        cf[target] = (inputs[scm.group_node], binning.index(inputs[score_node]))

    return build_distribution(group, bins, y0, y1, cf, groups=scm.groups)


def from_table(rows, cf_rows=None, outcomes=(0, 1), groups=("a0", "a1")) -> FiniteJointDistribution:
    """Build a distribution from explicit (group, bin, y0, y1, mass) rows.

    ``cf_rows``, when given, holds (aprime, i_group, i_bin, j_group, j_bin,
    mass) entries; both tables are normalized by the same total.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInputError("no rows")
    outcome_index = {y: j for j, y in enumerate(outcomes)}
    k = len(outcomes)

    agg = {}
    for g, b, y0, y1, m in rows:
        m = float(m)
        if m < 0:
            raise NegativeMassError(f"negative mass in row {(g, b, y0, y1, m)}")
        key = (int(g), int(b))
        cell = agg.setdefault(key, np.zeros((k, k)))
        cell[outcome_index[y0], outcome_index[y1]] += m

    support = sorted(agg)
    total = sum(cell.sum() for cell in agg.values())
    if total <= 0:
        raise ZeroMassError("table has zero total mass")

    n = len(support)
    om = np.zeros((n, k, k))
    for i, key in enumerate(support):
        om[i] = agg[key] / total
    mass = om.sum(axis=(1, 2))

    cf_mass = {}
    if cf_rows:
        point_of = {key: i for i, key in enumerate(support)}
        for aprime, ig, ib, jg, jb, m in cf_rows:
            m = float(m)
            if m < 0:
                raise NegativeMassError("negative counterfactual mass")
            mat = cf_mass.setdefault(int(aprime), np.zeros((n, n)))
            try:
                mat[point_of[(int(ig), int(ib))], point_of[(int(jg), int(jb))]] += m / total
            except KeyError as exc:
                raise InconsistentMassError(f"counterfactual row references unknown point: {exc}")

    return FiniteJointDistribution(
        group=np.array([g for g, _ in support]),
        bin=np.array([b for _, b in support]),
        mass=mass,
        outcome_mass=om,
        outcomes=tuple(outcomes),
        cf_mass=cf_mass,
        groups=tuple(groups),
    )


def transition_matrix(dist: FiniteJointDistribution, aprime: int) -> np.ndarray:
    """Row-stochastic matrix P[i, j] = Pr(X_cf(a') = x_j | X = x_i)."""
    if np.any(dist.mass <= 0):
        raise ZeroRowError("every support point needs positive mass")
    if aprime not in dist.cf_mass:
        raise KeyError(f"no counterfactual masses for group value {aprime}")
    return dist.cf_mass[aprime] / dist.mass[:, None]


def utility_table(dist: FiniteJointDistribution, lam: float, target_group: int = 1) -> UtilityTable:
    """Graduation probabilities r plus a diversity bonus on the target group."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if np.any(dist.mass <= 0):
        raise ZeroRowError("every support point needs positive mass")
    y_values = np.asarray(dist.outcomes, dtype=np.float64)
    r = dist.y1_joint() @ y_values / dist.mass
    u = r + lam * (dist.group == target_group)
    return UtilityTable(lam=float(lam), u=u, r=r)


# ---------------------------------------------------------------------------
# CSV interchange

def write_tables(dist: FiniteJointDistribution, mass_path, cf_path=None) -> None:
    with open(mass_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "bin", "y0", "y1", "mass"])
        for i in range(dist.n):
            for j0, y0 in enumerate(dist.outcomes):
                for j1, y1 in enumerate(dist.outcomes):
                    m = dist.outcome_mass[i, j0, j1]
                    if m > 0:
                        writer.writerow(
                            [int(dist.group[i]), int(dist.bin[i]), y0, y1, repr(float(m))]
                        )
    if cf_path is not None:
        with open(cf_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["aprime", "i_group", "i_bin", "j_group", "j_bin", "mass"])
            for aprime, mat in sorted(dist.cf_mass.items()):
                idx_i, idx_j = np.nonzero(mat)
                for i, j in zip(idx_i, idx_j):
                    writer.writerow(
                        [
                            aprime,
                            int(dist.group[i]),
                            int(dist.bin[i]),
                            int(dist.group[j]),
                            int(dist.bin[j]),
                            repr(float(mat[i, j])),
                        ]
                    )


def load_tables(mass_path, cf_path=None, outcomes=(0, 1), groups=("a0", "a1")):
    with open(mass_path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [
            (int(r["group"]), int(r["bin"]), int(r["y0"]), int(r["y1"]), float(r["mass"]))
            for r in reader
        ]
    cf_rows = None
    if cf_path is not None:
        with open(cf_path, newline="") as fh:
            reader = csv.DictReader(fh)
            cf_rows = [
                (
                    int(r["aprime"]),
                    int(r["i_group"]),
                    int(r["i_bin"]),
                    int(r["j_group"]),
                    int(r["j_bin"]),
                    float(r["mass"]),
                )
                for r in reader
            ]
    return from_table(rows, cf_rows, outcomes=outcomes, groups=groups)
