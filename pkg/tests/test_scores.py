import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from confsets import (
    ScoreSpec,
    ValidationError,
    draw_u,
    draw_u_many,
    rank_row,
    score,
    score_all_classes,
    score_temperature_curve,
)
from confsets.scores import rank_matrix, score_matrix, true_label_scores

from oracles import oracle_score

prob_rows = st.lists(st.integers(1, 50), min_size=2, max_size=10).map(
    lambda ws: (np.asarray(ws, dtype=float) / sum(ws))
)


def spec_strategy():
    return st.sampled_from([
        ScoreSpec(kind="aps"),
        ScoreSpec(kind="aps", randomized=True),
        ScoreSpec(kind="raps", raps_lambda=0.1, raps_kreg=2),
        ScoreSpec(kind="raps", raps_lambda=0.05, raps_kreg=1, randomized=True),
        ScoreSpec(kind="saps", saps_lambda=0.02),
        ScoreSpec(kind="saps", saps_lambda=0.1, randomized=True),
        ScoreSpec(kind="lac"),
    ])


# ---------------------------------------------------------------------------
# ranking


def test_rank_row_basic():
    ranked = rank_row([0.1, 0.6, 0.3])
    np.testing.assert_array_equal(ranked.sorted_probs, [0.6, 0.3, 0.1])
    np.testing.assert_array_equal(ranked.perm, [1, 2, 0])
    assert ranked.rank_of[1] == 1


def test_rank_row_tie_goes_to_lower_class():
    ranked = rank_row([0.5, 0.5])
    np.testing.assert_array_equal(ranked.perm, [0, 1])


def test_rank_row_uniform():
    ranked = rank_row([0.25] * 4)
    np.testing.assert_array_equal(ranked.perm, [0, 1, 2, 3])


@given(prob_rows)
def test_rank_row_invariants(probs):
    ranked = rank_row(probs)
    assert (np.diff(ranked.sorted_probs) <= 0).all()
    assert sorted(ranked.perm) == list(range(len(probs)))
    for k in range(len(probs)):
        assert ranked.perm[ranked.rank_of[k] - 1] == k


@given(prob_rows)
def test_rank_matrix_matches_rank_row(probs):
    stacked = np.vstack([probs, probs[::-1].copy()])
    sorted_probs, perm, rank_of = rank_matrix(stacked)
    for i in range(2):
        single = rank_row(stacked[i])
        np.testing.assert_array_equal(sorted_probs[i], single.sorted_probs)
        np.testing.assert_array_equal(perm[i], single.perm)
        np.testing.assert_array_equal(rank_of[i], single.rank_of)


# ---------------------------------------------------------------------------
# score values


def test_aps_nonrandomized_examples():
    spec = ScoreSpec(kind="aps")
    probs = [0.6, 0.3, 0.1]
    assert score(spec, probs, 1) == pytest.approx(0.9, abs=1e-15)
    assert score(spec, probs, 2) == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(score_all_classes(spec, probs), [0.6, 0.9, 1.0],
                               atol=1e-15)


def test_raps_penalty_example():
    spec = ScoreSpec(kind="raps", raps_lambda=0.1, raps_kreg=1, randomized=True)
    assert score(spec, [0.6, 0.3, 0.1], 2, u=1.0) == pytest.approx(1.2, abs=1e-15)


def test_saps_examples():
    spec = ScoreSpec(kind="saps", saps_lambda=0.02, randomized=True)
    assert score(spec, [0.6, 0.3, 0.1], 0, u=0.5) == pytest.approx(0.30, abs=1e-15)
    assert score(spec, [0.6, 0.3, 0.1], 2, u=0.5) == pytest.approx(0.63, abs=1e-15)


def test_lac_examples():
    spec = ScoreSpec(kind="lac")
    np.testing.assert_allclose(score_all_classes(spec, [0.6, 0.3, 0.1]),
                               [0.4, 0.7, 0.9], atol=1e-15)


def test_u_validation():
    rand = ScoreSpec(kind="aps", randomized=True)
    plain = ScoreSpec(kind="aps")
    with pytest.raises(ValidationError):
        score(rand, [0.5, 0.5], 0)  # missing u
    with pytest.raises(ValidationError):
        score(rand, [0.5, 0.5], 0, u=1.5)
    with pytest.raises(ValidationError):
        score(plain, [0.5, 0.5], 0, u=0.3)  # u forbidden


def test_missing_hyperparameters_rejected():
    with pytest.raises(ValidationError):
        ScoreSpec(kind="raps", raps_lambda=0.1)
    with pytest.raises(ValidationError):
        ScoreSpec(kind="saps")
    with pytest.raises(ValidationError):
        ScoreSpec(kind="aps", saps_lambda=0.1)


@given(prob_rows, spec_strategy(), st.floats(0.0, 1.0))
def test_scores_match_oracle(probs, spec, u):
    u_arg = u if spec.uses_u else None
    got = score_all_classes(spec, probs, u_arg)
    for k in range(len(probs)):
        expected = oracle_score(
            spec.kind, list(probs), k,
            u if spec.uses_u else 1.0,
            raps_lam=spec.raps_lambda or 0.0,
            raps_kreg=spec.raps_kreg or 1,
            saps_lam=spec.saps_lambda or 0.0,
        )
        assert got[k] == pytest.approx(expected, abs=1e-12)


@given(prob_rows, spec_strategy())
def test_u_equal_one_matches_nonrandomized(probs, spec):
    if not spec.uses_u:
        return
    with_u = score_all_classes(spec, probs, 1.0)
    plain = score_all_classes(
        ScoreSpec(kind=spec.kind, randomized=False,
                  raps_lambda=spec.raps_lambda, raps_kreg=spec.raps_kreg,
                  saps_lambda=spec.saps_lambda),
        probs,
    )
    np.testing.assert_array_equal(with_u, plain)


@given(prob_rows)
def test_raps_zero_penalty_equals_aps(probs):
    raps = ScoreSpec(kind="raps", raps_lambda=0.0, raps_kreg=1)
    aps = ScoreSpec(kind="aps")
    np.testing.assert_array_equal(score_all_classes(raps, probs),
                                  score_all_classes(aps, probs))


@given(prob_rows)
def test_aps_sorted_scores_cumulative(probs):
    spec = ScoreSpec(kind="aps")
    ranked = rank_row(probs)
    values = score_all_classes(spec, probs)[ranked.perm]
    assert (np.diff(values) >= -1e-15).all()
    assert values[-1] == pytest.approx(1.0, abs=1e-12)


@given(prob_rows, spec_strategy(), st.floats(0.0, 1.0))
def test_batched_paths_match_scalar(probs, spec, u):
    n = 3
    matrix = np.tile(probs, (n, 1))
    u_arr = np.full(n, u) if spec.uses_u else None
    u_arg = u if spec.uses_u else None
    per_row = score_all_classes(spec, probs, u_arg)
    batch = score_matrix(spec, matrix, u_arr)
    for i in range(n):
        np.testing.assert_array_equal(batch[i], per_row)
    labels = np.arange(n) % len(probs)
    tls = true_label_scores(spec, matrix, labels, u_arr)
    for i, lab in enumerate(labels):
        assert tls[i] == per_row[lab]


# ---------------------------------------------------------------------------
# uniform draws


def test_draw_u_deterministic():
    assert draw_u(7, 13) == draw_u(7, 13)
    assert draw_u(7, 13) != draw_u(7, 14)
    assert draw_u(8, 13) != draw_u(7, 13)


def test_draw_u_mean_near_half():
    us = draw_u_many(123, np.arange(100000))
    assert abs(us.mean() - 0.5) < 0.01
    assert us.min() >= 0.0 and us.max() < 1.0


def test_draw_u_order_independent():
    idx = np.array([5, 0, 99, 17])
    scattered = draw_u_many(11, idx)
    serial = draw_u_many(11, np.arange(100))
    np.testing.assert_array_equal(scattered, serial[idx])


# ---------------------------------------------------------------------------
# temperature curve


def test_temperature_curve_example():
    got = score_temperature_curve([2.0, 1.0, 0.0], 0, [0.5, 1.0])
    np.testing.assert_allclose(got, [0.866813, 0.665241], atol=5e-7)
    assert got[0] >= got[1]


def test_temperature_curve_last_rank_is_one():
    got = score_temperature_curve([2.0, 1.0, 0.0], 2, [0.5, 1.0, 2.0])
    np.testing.assert_allclose(got, 1.0, atol=1e-12)


def test_temperature_curve_uniform_logits():
    got = score_temperature_curve([1.0, 1.0, 1.0], 1, [0.25, 1.0, 4.0])
    np.testing.assert_allclose(got, got[0], atol=1e-12)


def test_temperature_curve_validates_grid():
    with pytest.raises(ValidationError):
        score_temperature_curve([1.0, 0.0], 0, [1.0, 0.5])
    with pytest.raises(ValidationError):
        score_temperature_curve([1.0, 0.0], 0, [-1.0, 0.5])
