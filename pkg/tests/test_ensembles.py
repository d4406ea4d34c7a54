"""Ensembling: simplex projection, member ranking, weight fitting, blending."""

from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from floecast import (
    EnsembleError,
    EnsembleSpec,
    ForecastRun,
    GramAccumulator,
    RANK_TIERS,
    apply_ensemble,
    fit_weights,
    fit_weights_from_gram,
    project_simplex,
    rank_members,
    tier_members,
)
from floecast.grids import LAND, OCEAN

from .conftest import make_mask
from .oracles import grid_search_weights

INIT = dt.date(2015, 3, 1)


# -- simplex projection ---------------------------------------------------------


def test_simplex_projection_hand_cases():
    np.testing.assert_allclose(project_simplex(np.array([2.0, 0.0])), [1.0, 0.0])
    np.testing.assert_allclose(project_simplex(np.array([0.6, 0.4])), [0.6, 0.4])
    np.testing.assert_allclose(project_simplex(np.array([0.5, -0.5])), [1.0, 0.0])
    # interior case in 2-D: ([v0-v1+1]/2, [v1-v0+1]/2)
    np.testing.assert_allclose(
        project_simplex(np.array([0.9, 0.5])), [0.7, 0.3], atol=1e-12
    )
    np.testing.assert_allclose(
        project_simplex(np.zeros(4)), np.full(4, 0.25), atol=1e-12
    )


@given(
    st.lists(
        st.floats(min_value=-10, max_value=10, allow_nan=False),
        min_size=1,
        max_size=8,
    ),
    st.integers(0, 2**32 - 1),
)
def test_simplex_projection_properties(vals, seed):
    v = np.array(vals, dtype=np.float64)
    w = project_simplex(v)
    assert w.min() >= 0.0
    assert w.sum() == pytest.approx(1.0, abs=1e-9)
    # projecting a point already on the simplex returns it
    np.testing.assert_allclose(project_simplex(w), w, atol=1e-9)
    # shifting along the all-ones direction does not move the projection
    np.testing.assert_allclose(project_simplex(v + 3.7), w, atol=1e-9)
    # no sampled simplex point is closer to v than the projection
    rng = np.random.default_rng(seed)
    for _ in range(10):
        s = rng.dirichlet(np.ones(v.size))
        assert np.sum((v - w) ** 2) <= np.sum((v - s) ** 2) + 1e-9


def test_simplex_projection_rejects_bad_shapes():
    with pytest.raises(EnsembleError):
        project_simplex(np.zeros((2, 2)))
    with pytest.raises(EnsembleError):
        project_simplex(np.zeros(0))


# -- ranking and tiers ------------------------------------------------------------


def test_ranking_orders_by_acc_then_rmse_then_id():
    assert rank_members([("solo", 0.4, 0.1)]) == ["solo"]
    rows = [("b", 0.8, 0.05), ("a", 0.9, 0.2)]
    assert rank_members(rows) == ["a", "b"]
    assert rank_members(rows[::-1]) == ["a", "b"]
    # equal ACC: lower RMSE first
    assert rank_members([("x", 0.5, 0.08), ("y", 0.5, 0.07)]) == ["y", "x"]
    # full tie: lexicographic
    assert rank_members([("n2", 0.5, 0.1), ("n1", 0.5, 0.1)]) == ["n1", "n2"]
    # undefined metrics sort worst
    assert rank_members([("u", None, 0.01), ("v", 0.1, 0.9)]) == ["v", "u"]
    assert rank_members([("u", 0.5, None), ("v", 0.5, 0.9)]) == ["v", "u"]
    with pytest.raises(EnsembleError):
        rank_members([])


def test_tier_sizes_follow_the_rank_protocol():
    ranked = [f"m{i}" for i in range(9)]
    assert RANK_TIERS == {"rank1": 4, "rank2": 7, "rank3": None}
    assert tier_members(ranked, "rank1") == ranked[:4]
    assert tier_members(ranked, "rank2") == ranked[:7]
    assert tier_members(ranked, "rank3") == ranked
    assert tier_members(ranked[:2], "rank1") == ranked[:2]  # short pool: keep all
    with pytest.raises(EnsembleError):
        tier_members(ranked, "rank4")


# -- spec validation and serialization ----------------------------------------------


def test_spec_validates_the_simplex_and_distinct_members():
    EnsembleSpec(("a", "b"), np.array([0.5, 0.5]), "rank1")
    with pytest.raises(EnsembleError):
        EnsembleSpec(("a", "b"), np.array([0.5]), "rank1")
    with pytest.raises(EnsembleError):
        EnsembleSpec(("a", "a"), np.array([0.5, 0.5]), "rank1")
    with pytest.raises(EnsembleError):
        EnsembleSpec(("a", "b"), np.array([0.7, 0.7]), "rank1")
    with pytest.raises(EnsembleError):
        EnsembleSpec(("a", "b"), np.array([1.5, -0.5]), "rank1")


def test_spec_json_round_trip_is_bit_exact(tmp_path):
    w = project_simplex(np.array([0.31, 0.27, 0.42000001]))
    spec = EnsembleSpec(
        ("dlinear", "scinet", "nlinear"),
        w,
        "rank1",
        objective=1.2345678901234567e-3,
        converged=True,
        degenerate=False,
        iterations=123,
    )
    again = EnsembleSpec.from_json(spec.to_json())
    assert again.member_ids == spec.member_ids
    np.testing.assert_array_equal(again.weights, spec.weights)
    assert again.objective == spec.objective
    assert again.iterations == 123

    spec.save(tmp_path / "spec.json")
    loaded = EnsembleSpec.load(tmp_path / "spec.json")
    np.testing.assert_array_equal(loaded.weights, spec.weights)
    assert loaded.to_json() == spec.to_json()


# -- streaming sufficient statistics ---------------------------------------------


def test_streaming_gram_matches_the_direct_computation():
    rng = np.random.default_rng(0)
    preds = rng.normal(size=(4, 300))
    truth = rng.normal(size=300)

    whole = GramAccumulator(4)
    whole.update(preds, truth)
    chunked = GramAccumulator(4)
    for lo in (0, 100, 170):
        hi = {0: 100, 100: 170, 170: 300}[lo]
        chunked.update(preds[:, lo:hi], truth[lo:hi])

    for acc in (whole, chunked):
        gram, cross, const = acc.normalized()
        np.testing.assert_allclose(gram, preds @ preds.T / 300, atol=1e-12)
        np.testing.assert_allclose(cross, preds @ truth / 300, atol=1e-12)
        assert const == pytest.approx(float(truth @ truth) / 300)
        assert acc.n_samples == 300

    g1, c1, k1 = whole.normalized()
    g2, c2, k2 = chunked.normalized()
    np.testing.assert_allclose(g1, g2, atol=1e-12)
    np.testing.assert_allclose(c1, c2, atol=1e-12)
    assert k1 == pytest.approx(k2)


def test_gram_submatrices_select_members():
    rng = np.random.default_rng(1)
    preds = rng.normal(size=(5, 50))
    truth = rng.normal(size=50)
    acc = GramAccumulator(5)
    acc.update(preds, truth)
    gram, cross, const = acc.normalized()
    sub_g, sub_c, sub_k = acc.submatrices([4, 1])
    np.testing.assert_array_equal(sub_g, gram[np.ix_([4, 1], [4, 1])])
    np.testing.assert_array_equal(sub_c, cross[[4, 1]])
    assert sub_k == const


def test_gram_accumulator_validation():
    with pytest.raises(EnsembleError):
        GramAccumulator(0)
    acc = GramAccumulator(2)
    with pytest.raises(EnsembleError):
        acc.normalized()  # nothing accumulated
    with pytest.raises(EnsembleError):
        acc.update(np.zeros((3, 10)), np.zeros(10))


# -- weight fitting ---------------------------------------------------------------


def _member_fixture(seed: int, m: int = 3, n: int = 400):
    """Members = truth + member-specific noise, so the blend is meaningful."""
    rng = np.random.default_rng(seed)
    truth = rng.normal(size=n)
    sds = np.linspace(0.2, 0.6, m)
    preds = truth[None, :] + rng.normal(size=(m, n)) * sds[:, None]
    return [f"m{i}" for i in range(m)], preds, truth


def _objective(preds, truth):
    def fn(w):
        return float(np.mean((w @ preds - truth) ** 2))

    return fn


def test_fitted_weights_match_a_fine_grid_search():
    ids, preds, truth = _member_fixture(2)
    spec = fit_weights(ids, preds, truth, "rank3")
    obj = _objective(preds, truth)
    grid_w, grid_obj = grid_search_weights(obj, 3, steps=100)
    assert spec.objective <= grid_obj + 1e-9  # at least as good as the grid
    assert abs(spec.objective - grid_obj) < 1e-3
    np.testing.assert_allclose(spec.weights, grid_w, atol=0.02)
    assert spec.converged


def test_exact_convex_mixture_is_recovered():
    rng = np.random.default_rng(3)
    preds = rng.normal(size=(2, 500))
    truth = 0.3 * preds[0] + 0.7 * preds[1]
    spec = fit_weights(["a", "b"], preds, truth, "rank1")
    np.testing.assert_allclose(spec.weights, [0.3, 0.7], atol=1e-6)
    assert spec.objective == pytest.approx(0.0, abs=1e-12)


def test_dominant_member_takes_nearly_all_weight():
    rng = np.random.default_rng(4)
    truth = rng.normal(size=600)
    good = truth + rng.normal(0, 0.05, size=600)
    noise1 = rng.normal(size=600) * 2.0
    noise2 = rng.normal(size=600) * 2.0
    spec = fit_weights(["good", "n1", "n2"], np.stack([good, noise1, noise2]), truth, "rank1")
    assert spec.weights[0] > 0.9
    obj = _objective(np.stack([good, noise1, noise2]), truth)
    _, grid_obj = grid_search_weights(obj, 3, steps=100)
    assert spec.objective <= grid_obj + 1e-9


def test_ensemble_never_loses_to_its_best_member():
    for seed in range(5):
        ids, preds, truth = _member_fixture(seed, m=4)
        spec = fit_weights(ids, preds, truth, "rank3")
        member_mses = [float(np.mean((p - truth) ** 2)) for p in preds]
        assert spec.objective <= min(member_mses) + 1e-9


def test_wider_tiers_never_hurt_the_objective():
    ids, preds, truth = _member_fixture(6, m=5)
    acc = GramAccumulator(5)
    acc.update(preds, truth)
    gram, cross, const = acc.normalized()
    full = fit_weights_from_gram(ids, gram, cross, const, "rank3")
    sub_g, sub_c, sub_k = acc.submatrices([0])
    solo = fit_weights_from_gram([ids[0]], sub_g, sub_c, sub_k, "rank1")
    assert full.objective <= solo.objective + 1e-9
    assert solo.weights.tolist() == [1.0]
    assert solo.iterations == 0


def test_identical_members_are_flagged_degenerate():
    rng = np.random.default_rng(7)
    member = rng.normal(size=200)
    truth = rng.normal(size=200)
    spec = fit_weights(["a", "b"], np.stack([member, member]), truth, "rank1")
    assert spec.degenerate
    assert spec.weights.sum() == pytest.approx(1.0, abs=1e-9)
    # any simplex point gives the same loss; the returned one is optimal
    assert spec.objective == pytest.approx(
        float(np.mean((member - truth) ** 2)), rel=1e-9
    )


def test_weight_fitting_is_deterministic():
    ids, preds, truth = _member_fixture(8)
    a = fit_weights(ids, preds, truth, "rank2")
    b = fit_weights(ids, preds, truth, "rank2")
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.objective == b.objective
    assert a.iterations == b.iterations


def test_weight_fitting_validates_inputs():
    with pytest.raises(EnsembleError):
        fit_weights(["a"], np.zeros((1, 10)), np.zeros(10), "rank1")  # < 2 members
    with pytest.raises(EnsembleError):
        fit_weights(["a", "b"], np.zeros((2, 10)), np.zeros(9), "rank1")
    with pytest.raises(EnsembleError):
        fit_weights(["a", "b", "c"], np.zeros((2, 10)), np.zeros(10), "rank1")
    with pytest.raises(EnsembleError):
        fit_weights_from_gram(["a", "b"], np.zeros((3, 3)), np.zeros(3), 0.0, "rank1")


# -- blending runs -----------------------------------------------------------------


def _run(member_id: str, mask: np.ndarray, fill, horizon: int = 4) -> ForecastRun:
    ocean = mask == OCEAN
    rng = np.random.default_rng(abs(hash(member_id)) % 2**32)
    values = np.full((horizon,) + mask.shape, np.nan, dtype=np.float32)
    for t in range(horizon):
        field = fill(rng) if callable(fill) else np.full(mask.shape, fill)
        values[t][ocean] = np.asarray(field, dtype=np.float32)[ocean]
    return ForecastRun(member_id, INIT, values, mask, 625.0)


def test_one_hot_ensemble_reproduces_the_member():
    mask = make_mask(6, 7)
    runs = [
        _run("a", mask, lambda rng: rng.uniform(0, 1, mask.shape)),
        _run("b", mask, lambda rng: rng.uniform(0, 1, mask.shape)),
    ]
    spec = EnsembleSpec(("a", "b"), np.array([1.0, 0.0]), "rank1")
    out = apply_ensemble(spec, runs)
    np.testing.assert_array_equal(out.values, runs[0].values)
    assert out.backbone_id == "ensemble-rank1"
    assert out.init_date == INIT
    assert out.cell_area_km2 == 625.0


def test_uniform_ensemble_of_identical_runs_is_that_run():
    mask = make_mask(5, 5)
    base = _run("a", mask, lambda rng: rng.uniform(0, 1, mask.shape))
    twin = ForecastRun("b", INIT, base.values.copy(), mask, 625.0)
    spec = EnsembleSpec(("a", "b"), np.array([0.5, 0.5]), "rank2")
    out = apply_ensemble(spec, [base, twin])
    np.testing.assert_allclose(out.values, base.values, atol=1e-7)


def test_weighted_mean_matches_a_hand_oracle():
    mask = make_mask(5, 6)
    ocean = mask == OCEAN
    runs = [_run("lo", mask, 0.2), _run("hi", mask, 0.8)]
    spec = EnsembleSpec(("lo", "hi"), np.array([0.25, 0.75]), "rank1")
    out = apply_ensemble(spec, runs)
    want = 0.25 * 0.2 + 0.75 * 0.8
    np.testing.assert_allclose(out.values[:, ocean], np.float32(want), atol=1e-7)
    assert np.all(np.isnan(out.values[:, ~ocean]))
    assert float(out.values[:, ocean].min()) >= 0.0
    assert float(out.values[:, ocean].max()) <= 1.0


def test_member_order_in_the_run_list_does_not_matter():
    mask = make_mask(6, 6)
    runs = [
        _run("a", mask, lambda rng: rng.uniform(0, 1, mask.shape)),
        _run("b", mask, lambda rng: rng.uniform(0, 1, mask.shape)),
        _run("c", mask, lambda rng: rng.uniform(0, 1, mask.shape)),
    ]
    spec = EnsembleSpec(("a", "b", "c"), np.array([0.2, 0.3, 0.5]), "rank3")
    fwd = apply_ensemble(spec, runs)
    rev = apply_ensemble(spec, runs[::-1])
    np.testing.assert_array_equal(fwd.values, rev.values)


def test_blending_rejects_missing_or_misaligned_members():
    mask = make_mask(5, 5)
    a = _run("a", mask, 0.4)
    b = _run("b", mask, 0.6)
    spec = EnsembleSpec(("a", "b"), np.array([0.5, 0.5]), "rank1")
    with pytest.raises(EnsembleError):
        apply_ensemble(spec, [a])  # b missing
    with pytest.raises(EnsembleError):
        late = ForecastRun("b", INIT + dt.timedelta(days=1), b.values, mask, 625.0)
        apply_ensemble(spec, [a, late])
    with pytest.raises(EnsembleError):
        short = ForecastRun("b", INIT, b.values[:2], mask, 625.0)
        apply_ensemble(spec, [a, short])
    with pytest.raises(EnsembleError):
        other_mask = mask.copy()
        other_mask[2, 2] = LAND
        apply_ensemble(spec, [a, ForecastRun("b", INIT, b.values, other_mask, 625.0)])
