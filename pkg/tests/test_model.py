import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from ivpi.model import (
    CELLS,
    ObservedLaw,
    TrialCounts,
    law_from_counts,
    monotone_mle,
    monotonicity_margins,
    validate_law,
)

cell_counts = st.lists(st.integers(0, 500), min_size=8, max_size=8).filter(
    lambda v: sum(v[:4]) > 0 and sum(v[4:]) > 0
)


def test_law_from_counts_single_cells():
    counts = dict.fromkeys(CELLS, 0)
    counts[(1, 1, 1)] = counts[(1, 1, 0)] = 50
    counts[(0, 0, 1)] = counts[(0, 0, 0)] = 50
    law = law_from_counts(TrialCounts.from_mapping(counts))
    assert law.p[1, 1, 1] == 0.5
    assert law.p[1, 1, 0] == 0.5
    assert law.p[0, 0, 0] == 0.5
    assert law.p[1, 0, 0] == 0.0


def test_law_from_equal_counts_is_uniform():
    law = law_from_counts(TrialCounts(np.full((2, 2, 2), 7)))
    assert np.all(law.p == 0.25)


def test_flu_law_arm_totals(flu_counts):
    assert list(flu_counts.arm_totals()) == [1389, 1472]
    assert flu_counts.total == 2861


@pytest.mark.parametrize(
    "arr, match",
    [
        (np.zeros((2, 2, 2)), "no observations"),
        (np.full((2, 2, 2), -1), "nonnegative"),
        (np.full((2, 2, 2), 1.5), "integers"),
        (np.ones((2, 2)), "shape"),
    ],
)
def test_trial_counts_rejects(arr, match):
    with pytest.raises(ValueError, match=match):
        TrialCounts(arr)


def test_zero_arm_rejected():
    arr = np.ones((2, 2, 2))
    arr[1] = 0
    with pytest.raises(ValueError, match="z=1"):
        TrialCounts(arr)


def test_from_mapping_requires_all_cells():
    partial = {c: 1 for c in CELLS[:7]}
    with pytest.raises(ValueError, match="missing"):
        TrialCounts.from_mapping(partial)


def test_from_mapping_rejects_nonbinary_level():
    counts = {c: 1 for c in CELLS}
    counts[(2, 0, 0)] = 1
    with pytest.raises(ValueError, match="0 or 1"):
        TrialCounts.from_mapping(counts)


def test_from_records_aggregates():
    records = [(0, 0, 0), (0, 1, 1), (1, 1, 1), (1, 1, 1)]
    counts = TrialCounts.from_records(records)
    assert counts.n[1, 1, 1] == 2
    assert counts.total == 4


def test_types_are_immutable(flu_counts):
    with pytest.raises(ValueError):
        flu_counts.n[0, 0, 0] = 5
    law = law_from_counts(flu_counts)
    with pytest.raises(ValueError):
        law.p[0, 0, 0] = 0.1


def test_validate_uniform_ok():
    assert validate_law(ObservedLaw(np.full((2, 2, 2), 0.25))).ok


def test_validate_normalization_failure():
    p = np.full((2, 2, 2), 0.25)
    p[0, 0, 0] = 0.15
    report = validate_law(ObservedLaw(p))
    assert not report.ok
    assert [f.code for f in report.fatal] == ["normalization"]


def test_validate_negative_entry():
    p = np.full((2, 2, 2), 0.25)
    p[1, 0, 0] = -0.05
    p[1, 0, 1] = 0.55
    report = validate_law(ObservedLaw(p))
    assert not report.ok
    assert "range" in [f.code for f in report.fatal]


def test_validate_does_not_mutate():
    p = np.full((2, 2, 2), 0.25)
    law = ObservedLaw(p)
    before = law.p.copy()
    validate_law(law)
    assert np.array_equal(law.p, before)


@given(cell_counts)
def test_counts_always_give_valid_law(values):
    law = law_from_counts(TrialCounts(np.array(values).reshape(2, 2, 2)))
    report = validate_law(law, tol=1e-12)
    assert report.ok
    assert np.all(np.abs(law.p.sum(axis=(1, 2)) - 1) <= 1e-12)


@given(cell_counts, st.integers(1, 50), st.integers(1, 50))
def test_law_scale_invariant_per_arm(values, k0, k1):
    arr = np.array(values).reshape(2, 2, 2)
    scaled = arr.copy()
    scaled[0] *= k0
    scaled[1] *= k1
    a = law_from_counts(TrialCounts(arr)).p
    b = law_from_counts(TrialCounts(scaled)).p
    assert np.max(np.abs(a - b)) <= 1e-12


# monotone MLE -----------------------------------------------------------------


def _slsqp_mle(n):
    """Generic constrained optimizer over the 8 cell probabilities."""
    n = n.astype(float)
    eps = 1e-12

    def negll(v):
        return -np.sum(n.reshape(-1) * np.log(np.maximum(v, eps)))

    cons = [
        {"type": "eq", "fun": lambda v: v[:4].sum() - 1},
        {"type": "eq", "fun": lambda v: v[4:].sum() - 1},
    ]
    # flat index 4*z + 2*x + y
    for x, y in itertools.product((0, 1), repeat=2):
        hi, lo = (4 + 2 * x + y, 2 * x + y) if x == 1 else (2 * x + y, 4 + 2 * x + y)
        cons.append({"type": "ineq", "fun": lambda v, hi=hi, lo=lo: v[hi] - v[lo]})
    start = np.full(8, 0.25)
    res = minimize(negll, start, method="SLSQP", constraints=cons, bounds=[(eps, 1)] * 8,
                   options={"ftol": 1e-14, "maxiter": 1000})
    return res.x.reshape(2, 2, 2), -res.fun


def test_monotone_mle_no_change_when_monotone():
    arr = np.array([[[40, 10], [5, 5]], [[20, 5], [20, 15]]])
    fit = monotone_mle(TrialCounts(arr))
    assert not fit.projected
    assert fit.max_shift == 0.0
    assert np.allclose(fit.law.p, law_from_counts(TrialCounts(arr)).p, atol=1e-15)


def test_monotone_mle_flu_pools_treated_hospitalized(flu_counts):
    fit = monotone_mle(flu_counts)
    assert fit.pooled_cells == ((1, 1),)
    assert fit.law.p[0, 1, 1] == pytest.approx(61 / 2861, abs=1e-15)
    assert fit.law.p[1, 1, 1] == pytest.approx(61 / 2861, abs=1e-15)
    assert min(monotonicity_margins(fit.law).values()) >= -1e-12
    assert validate_law(fit.law, tol=1e-12).ok


@pytest.mark.parametrize("seed", range(15))
def test_monotone_mle_matches_generic_optimizer(seed):
    rng = np.random.default_rng(seed)
    arr = rng.integers(1, 60, size=(2, 2, 2))
    fit = monotone_mle(TrialCounts(arr))
    p_ref, ll_ref = _slsqp_mle(arr)
    ll = float(np.sum(arr * np.log(fit.law.p)))
    # SLSQP satisfies its constraints only to ~1e-8, so it can edge past the true optimum
    assert ll >= ll_ref - 1e-6
    assert np.max(np.abs(fit.law.p - p_ref)) < 1e-4
