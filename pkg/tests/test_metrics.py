import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rawtfnet.errors import ConfigError, DataError, ParseError
from rawtfnet.metrics import (ScoreRecord, ScoreSet, TdcfCosts, bucket_index, compute_eer, compute_min_tdcf,
                              det_points, duration_bucketed_eer, read_scores, write_scores)

from oracles import brute_force_eer, brute_force_min_tdcf, brute_force_operating_points


def _random_sets(n_sets, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_sets):
        n, m = rng.integers(1, 201, 2)
        shift = rng.uniform(-1, 3)
        if rng.random() < 0.3:  # heavy ties
            bona = rng.integers(0, 6, n).astype(float) + (shift > 1)
            spoof = rng.integers(0, 6, m).astype(float)
        else:
            bona = rng.standard_normal(n) + shift
            spoof = rng.standard_normal(m)
        yield bona, spoof


def test_eer_matches_brute_force_on_1000_sets():
    for bona, spoof in _random_sets(1000):
        eer, thr = compute_eer((bona, spoof))
        assert abs(eer - brute_force_eer(bona, spoof)) <= 1e-12
        assert np.isfinite(thr)


def test_min_tdcf_matches_brute_force_on_1000_sets():
    rng = np.random.default_rng(1)
    for bona, spoof in _random_sets(1000, seed=2):
        costs = TdcfCosts(*rng.uniform(0, 2, 3))
        got, _ = compute_min_tdcf((bona, spoof), costs)
        assert abs(got - brute_force_min_tdcf(bona, spoof, costs.c0, costs.c1, costs.c2)) <= 1e-12


def test_eer_within_interpolation_step_of_minimax():
    for bona, spoof in _random_sets(1000, seed=3):
        pts = brute_force_operating_points(bona, spoof)
        minimax = min(max(far, frr) for far, frr in pts)
        eer = compute_eer((bona, spoof))[0]
        i = next(k for k, (far, frr) in enumerate(pts) if far - frr <= 0)
        step = 0.0 if i == 0 else max(pts[i - 1][0] - pts[i][0], pts[i][1] - pts[i - 1][1])
        assert eer <= minimax + 1e-12
        assert eer >= minimax - step - 1e-12


@pytest.mark.parametrize("bona, spoof, expected", [([2, 3], [0, 1], 0.0), ([0, 1], [2, 3], 1.0),
                                                   ([1, 3], [0, 2], 0.5)])
def test_eer_hand_cases(bona, spoof, expected):
    assert compute_eer((bona, spoof))[0] == expected


def test_tdcf_hand_cases():
    s = ScoreSet([2.0, 3.0], [0.0, 1.0])
    assert compute_min_tdcf(s, TdcfCosts(0, 1, 1))[0] == 0.0
    assert compute_min_tdcf(s, TdcfCosts(1, 1, 2))[0] == 0.5


def test_tdcf_random_50_50_against_101_points():
    rng = np.random.default_rng(4)
    bona, spoof = rng.standard_normal(50) + 1, rng.standard_normal(50)
    assert len(brute_force_operating_points(bona, spoof)) == 101
    costs = TdcfCosts(0.3, 1.2, 0.7)
    got = compute_min_tdcf((bona, spoof), costs)[0]
    assert abs(got - brute_force_min_tdcf(bona, spoof, 0.3, 1.2, 0.7)) <= 1e-12


def test_errors():
    with pytest.raises(DataError):
        compute_eer(([], [1.0]))
    with pytest.raises(DataError):
        compute_eer(([np.nan], [1.0]))
    with pytest.raises(ConfigError):
        compute_min_tdcf(([1.0], [0.0]), TdcfCosts(0, 0, 1))
    with pytest.raises(ConfigError):
        compute_min_tdcf(([1.0], [0.0]), TdcfCosts(-1, 1, 1))


def test_det_points_counts_and_endpoints():
    rng = np.random.default_rng(5)
    bona, spoof = rng.standard_normal(7), rng.standard_normal(9)
    pts = det_points((bona, spoof))
    assert len(pts) == 17
    assert pts[0] == (1.0, 0.0) and pts[-1] == (0.0, 1.0)


def test_det_points_monotone_on_100_sets():
    for bona, spoof in list(_random_sets(100, seed=6)):
        far, frr = np.array(det_points((bona, spoof))).T
        assert np.all(np.diff(far) <= 0) and np.all(np.diff(frr) >= 0)


def test_bucket_membership():
    assert bucket_index(3.5) == 1
    assert bucket_index(4.0) == 2
    assert bucket_index(0.0) == 0
    assert bucket_index(100.0) == 4
    with pytest.raises(DataError):
        bucket_index(-0.1)


def test_single_bucket_equals_global_eer():
    rng = np.random.default_rng(7)
    scores = rng.standard_normal(30)
    labels = {f"u{i}": ("bonafide" if i % 3 == 0 else "spoof") for i in range(30)}
    records = [ScoreRecord(f"u{i}", scores[i], 2.5) for i in range(30)]
    res = duration_bucketed_eer(records, labels)
    assert [b.n for b in res] == [0, 30, 0, 0, 0]
    bona = [scores[i] for i in range(30) if i % 3 == 0]
    spoof = [scores[i] for i in range(30) if i % 3]
    assert res[1].eer == compute_eer((bona, spoof))[0]
    assert res[0].eer is None and res[1].label == "[2,4)" and res[4].label == "[8,inf)"


def test_bucket_missing_class_is_undefined():
    res = duration_bucketed_eer([ScoreRecord("a", 1.0, 1.0), ScoreRecord("b", 0.0, 5.0)],
                                {"a": "bonafide", "b": "spoof"})
    assert res[0].n == 1 and res[0].eer is None


def test_score_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    records = [ScoreRecord(f"utt_{i}", float(v)) for i, v in enumerate(rng.standard_normal(50) * 10 ** rng.uniform(-3, 3, 50))]
    write_scores(tmp_path / "s.txt", records)
    back = read_scores(tmp_path / "s.txt")
    assert [r.utt_id for r in back] == [r.utt_id for r in records]
    for a, b in zip(records, back):
        assert abs(a.score - b.score) <= 1e-9 * max(1.0, abs(a.score))


def test_score_file_parse_errors(tmp_path):
    (tmp_path / "bad.txt").write_text("u1 0.5\nu2\n")
    with pytest.raises(ParseError, match=":2:"):
        read_scores(tmp_path / "bad.txt")
    (tmp_path / "bad2.txt").write_text("u1 abc\n")
    with pytest.raises(ParseError):
        read_scores(tmp_path / "bad2.txt")


scores = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(scores, scores)
def test_rank_invariance(bona, spoof):
    def f(v):
        return [math.exp(x / 50) * 3 + 1 for x in v]

    # the transform must stay strictly increasing after rounding
    assume(len(set(f(bona + spoof))) == len(set(bona + spoof)))
    costs = TdcfCosts(0.2, 1.0, 3.0)
    assert compute_eer((bona, spoof))[0] == pytest.approx(compute_eer((f(bona), f(spoof)))[0], abs=1e-12)
    assert compute_min_tdcf((bona, spoof), costs)[0] == pytest.approx(
        compute_min_tdcf((f(bona), f(spoof)), costs)[0], abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(scores, scores, st.floats(0, 2), st.floats(0.01, 2), st.floats(0.01, 2))
def test_ranges(bona, spoof, c0, c1, c2):
    eer = compute_eer((bona, spoof))[0]
    assert 0.0 <= eer <= 1.0
    costs = TdcfCosts(c0, c1, c2)
    t = compute_min_tdcf((bona, spoof), costs)[0]
    floor = c0 / (c0 + min(c1, c2))
    assert floor - 1e-12 <= t <= 1.0 + 1e-12
    assert t <= (c0 + c1) / costs.normalizer + 1e-12 and t <= (c0 + c2) / costs.normalizer + 1e-12


@settings(max_examples=200, deadline=None)
@given(scores, scores, st.data())
def test_duplicate_scores_add_no_operating_points(bona, spoof, data):
    before = det_points((bona, spoof))
    dup = data.draw(st.sampled_from(bona + spoof))
    for b2, s2 in ((bona + [dup], spoof), (bona, spoof + [dup])):
        assert len(det_points((b2, s2))) == len(before)
