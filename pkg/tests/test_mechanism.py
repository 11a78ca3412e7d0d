import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twostage_dr.mechanism import (
    DeviationTracker,
    PaymentRecord,
    day_utility,
    first_stage_payment,
    long_run_average,
    penalty_event,
    recount,
    second_stage_settlement,
    update_tracker,
)
from twostage_dr.model import PenaltySchedule


def test_first_stage_examples():
    assert first_stage_payment(845 / 6, 80, 50) == pytest.approx(110.8333333333, abs=1e-9)
    assert first_stage_payment(845 / 11, 80, 25) == pytest.approx(21.8181818181, abs=1e-9)
    assert first_stage_payment(80, 80, 0) == 0


def test_settlement_examples():
    s = PenaltySchedule()
    assert second_stage_settlement(7, 50, 50, False, s) == 0
    assert s.penalty(4) == 8
    assert second_stage_settlement(4, 30, 50, True, s) == -28
    out = second_stage_settlement(4, np.array([30.0, 50.0]), 50.0, np.array([True, False]), s)
    np.testing.assert_array_equal(out, [-28.0, 0.0])


def test_payment_record_total():
    r = PaymentRecord(110.8333, -3.0, True, 47.0)
    assert r.total == 110.8333 + -3.0


def test_day_utility_examples():
    assert day_utility(665 / 6, 50) == pytest.approx(365 / 6)
    assert day_utility(0, 0) == 0


def test_long_run_average_examples():
    mean, tail = long_run_average(np.full(100, 60.8333))
    assert mean == pytest.approx(60.8333) and tail == pytest.approx(60.8333)
    mean, _ = long_run_average(np.tile([0.0, 2.0], 50))
    assert mean == 1.0
    u = np.full(10**5, 3.0)
    u[99] -= PenaltySchedule().penalty(100)
    mean, _ = long_run_average(u)
    assert abs(mean - 3.0) <= PenaltySchedule().penalty(100) / 1e5 + 1e-12
    with pytest.raises(ValueError):
        long_run_average([])


def test_f_counting_example():
    tr = DeviationTracker(np.array([[0.5, 0.5]]))
    for t in (0, 0, 1, 0):
        update_tracker(tr, np.array([t]))
    assert tr.f_values(0)[0] == pytest.approx(0.25)
    assert not tr.events(PenaltySchedule())[0]
    assert PenaltySchedule().threshold(4) == pytest.approx(1.317, abs=1e-3)


def test_h_counting_example():
    tr = DeviationTracker(np.array([[0.5, 0.5], [1.0, 0.0]]))
    tr.update(np.array([0, 0])).update(np.array([1, 0]))
    assert tr.h_values(0)[(0, (0,))] == pytest.approx(0.0)


def test_first_day_never_penalised():
    tr = DeviationTracker(np.array([[0.01, 0.99], [0.5, 0.5]]))
    tr.update(np.array([0, 1]))
    assert not penalty_event(tr, 0, PenaltySchedule())


def test_rejects_bad_reports():
    tr = DeviationTracker(np.array([[0.5, 0.5]]))
    with pytest.raises(ValueError):
        tr.update(np.array([2]))
    with pytest.raises(ValueError):
        tr.update(np.array([0, 1]))


@pytest.mark.parametrize("backend", ["dense", "sparse"])
@pytest.mark.parametrize("n,k", [(1, 3), (2, 3), (3, 2), (4, 3)])
def test_tracker_matches_recount_every_97th_day(backend, n, k, rng):
    theta = rng.dirichlet(np.ones(k), size=n)
    reports = rng.integers(0, k, size=(600, n))
    tr = DeviationTracker(theta, backend=backend)
    start = 0
    for stop in range(97, 601, 97):
        sup_f, sup_h = tr.update_block(reports[start:stop])
        f_ref, h_ref = recount(reports[:stop], theta)
        np.testing.assert_allclose(tr.f_values(0), f_ref[0], atol=1e-12)
        for i in range(n):
            np.testing.assert_allclose(tr.f_values(i), f_ref[i], atol=1e-12)
            got = tr.h_values(i)
            assert set(got) <= set(h_ref[i])
            for key, v in h_ref[i].items():
                assert got.get(key, 0.0) == pytest.approx(v, abs=1e-12)
            assert sup_h[-1, i] == pytest.approx(max(abs(v) for v in h_ref[i].values()), abs=1e-12)
            assert sup_f[-1, i] == pytest.approx(np.abs(f_ref[i]).max(), abs=1e-12)
        start = stop


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(2, 3), st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_backends_agree(n, k, days, seed):
    r = np.random.default_rng(seed)
    theta = r.dirichlet(np.ones(k), size=n)
    reports = r.integers(0, k, size=(days, n))
    a = DeviationTracker(theta, backend="dense").update_block(reports)
    b = DeviationTracker(theta, backend="sparse").update_block(reports)
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(2, 3), st.integers(1, 80), st.integers(0, 2**32 - 1))
def test_count_invariants(n, k, days, seed):
    r = np.random.default_rng(seed)
    theta = r.dirichlet(np.ones(k), size=n)
    reports = r.integers(0, k, size=(days, n))
    tr = DeviationTracker(theta)
    tr.update_block(reports)
    assert np.all(tr.N.sum(axis=1) == days)
    for i in range(n):
        f = tr.f_values(i)
        assert np.all(np.abs(f) <= 1)
        assert all(abs(v) <= 1 for v in tr.h_values(i).values())


def test_block_split_invariance(rng):
    theta = rng.dirichlet(np.ones(3), size=3)
    reports = rng.integers(0, 3, size=(300, 3))
    whole = DeviationTracker(theta).update_block(reports)
    tr = DeviationTracker(theta)
    parts = [tr.update_block(reports[s:s + 37]) for s in range(0, 300, 37)]
    np.testing.assert_array_equal(whole[0], np.concatenate([p[0] for p in parts]))
    np.testing.assert_allclose(whole[1], np.concatenate([p[1] for p in parts]), atol=1e-15)


def test_truthful_statistic_below_threshold():
    theta = np.array([0.2, 0.3, 0.5])
    s = PenaltySchedule()
    hits = 0
    for seed in range(20):
        r = np.random.default_rng(seed)
        rep = np.searchsorted(np.cumsum(theta), r.random(10**5), side="right")[:, None]
        tr = DeviationTracker(theta[None, :])
        tr.update_block(rep)
        hits += tr.sup_f[0] < s.threshold(10**5)
    assert hits >= 20 * 0.99


def test_constant_misreport_triggers_by_day_50():
    s = PenaltySchedule()
    for seed in range(20):
        r = np.random.default_rng(seed)
        rep = (r.random(50) >= 0.9).astype(int)[:, None]
        tr = DeviationTracker(np.array([[0.1, 0.9]]))
        sup_f, sup_h = tr.update_block(rep)
        r_l = s.threshold(np.arange(1, 51))
        assert np.any((sup_f[:, 0] >= r_l) | (sup_h[:, 0] >= r_l))
