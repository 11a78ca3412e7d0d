import csv
import dataclasses

import numpy as np
import pytest

from twostage_dr import instances
from twostage_dr.agents import make_strategy
from twostage_dr.engine import audit_compliance, run, summarize
from twostage_dr.model import StrategySpec, validate_config


def read_ledger(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_deterministic_instance(det_cfg):
    res = run(det_cfg)
    np.testing.assert_allclose(res.utilities, np.tile([365 / 6, -35 / 11], (10, 1)), atol=1e-9)
    np.testing.assert_allclose(res.p1, [665 / 6, 240 / 11], atol=1e-9)
    assert np.all(res.p2 == res.p2[0]) and np.all(res.curtailments == res.curtailments[0])
    np.testing.assert_allclose(res.social_cost, 80.0, atol=1e-9)
    assert not res.penalties.any()


def test_zero_cost_system():
    doc = instances.small_stochastic(days=50, generator=None)
    doc["costs"]["reserve"]["a"] = 0.0
    res = run(validate_config(doc))
    for arr in (res.payments, res.utilities, res.social_cost, res.p1):
        assert np.all(arr == 0)


def test_ledger_columns_and_determinism(game_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(game_cfg, ledger_path=a)
    run(game_cfg, ledger_path=b)
    assert a.read_bytes() == b.read_bytes()
    with open(a) as fh:
        assert fh.readline().strip() == "day,z,load_id,true_type,reported_type,curtailment,consumption,p1,p2,penalty,utility,social_cost"


def test_running_averages_from_ledger(game_cfg, tmp_path):
    path = tmp_path / "ledger.csv"
    res = run(game_cfg, ledger_path=path)
    rows = read_ledger(path)
    assert len(rows) == game_cfg.days * game_cfg.n
    u = np.array([float(r["utility"]) for r in rows]).reshape(game_cfg.days, game_cfg.n)
    sc = np.array([float(r["social_cost"]) for r in rows])[:: game_cfg.n]
    np.testing.assert_allclose(np.cumsum(u, axis=0) / np.arange(1, game_cfg.days + 1)[:, None],
                               res.running_utility(), atol=1e-9)
    np.testing.assert_allclose(np.cumsum(sc) / np.arange(1, game_cfg.days + 1), res.running_social_cost(), atol=1e-9)
    assert len({r["p1"] for r in rows if r["load_id"] == "0"}) == 1


def test_block_size_does_not_change_results(game_cfg):
    a = run(game_cfg, block_days=1)
    b = run(game_cfg, block_days=333)
    for f in ("utilities", "penalties", "reports", "social_cost"):
        np.testing.assert_array_equal(getattr(a, f), getattr(b, f))


def test_seed_override_changes_path(game_cfg):
    a, b = run(game_cfg, seed=1), run(game_cfg, seed=2)
    assert not np.array_equal(a.z, b.z)
    assert a.decision.w_star == b.decision.w_star


def test_payment_identity_and_accounting(game_cfg):
    strategies = [make_strategy(StrategySpec("dist-misreport", distribution=(0.3, 0.3, 0.4)), game_cfg.type_space),
                  make_strategy(StrategySpec(), game_cfg.type_space)]
    res = run(game_cfg, strategies)
    assert res.penalties[:, 0].any()
    J = game_cfg.penalty.penalty(np.arange(1, game_cfg.days + 1))[:, None]
    rhs = (res.w_minus - res.decision.w_star) + res.reported_cost - J * res.penalties
    np.testing.assert_allclose(res.payments, rhs, rtol=1e-12, atol=1e-9)
    gen = game_cfg.costs.generator(res.decision.g_star)
    np.testing.assert_array_equal(res.social_cost, gen + game_cfg.costs.reserve(res.reserve) + res.true_cost.sum(axis=1))


def test_compliance_audit(game_cfg):
    res = run(game_cfg)
    rec = res.day_record(17)
    assert audit_compliance(rec)
    tampered = dataclasses.replace(rec, consumption=rec.consumption + np.array([1.0, 0.0]))
    assert not audit_compliance(tampered)


def test_compliance_with_baseline_inflation():
    cfg = validate_config(instances.baseline_game(days=200))
    strategies = [make_strategy(StrategySpec("baseline-inflate", delta=1), cfg.type_space),
                  make_strategy(StrategySpec(), cfg.type_space)]
    res = run(cfg, strategies)
    assert all(audit_compliance(res.day_record(l)) for l in range(1, 201))


def test_physical_versus_literal_convention():
    doc = instances.baseline_game(days=300)
    doc["loads"][0]["strategy"] = {"kind": "baseline-inflate", "delta": 1, "coherent": True}
    phys = run(validate_config(doc))
    lit = run(validate_config({**doc, "utility_convention": "literal"}))
    inflated = phys.reports[:, 0] != phys.true_types[:, 0]
    assert inflated.any()
    assert np.all(phys.true_cost[~inflated, 0] == lit.true_cost[~inflated, 0])
    assert not np.allclose(phys.true_cost[inflated, 0], lit.true_cost[inflated, 0])


def test_truthful_utility_identity_net_demand(game_cfg):
    res = run(game_cfg)
    ok = ~res.penalties
    expected = np.broadcast_to(res.w_minus - res.decision.w_star, res.utilities.shape)
    np.testing.assert_allclose(res.utilities[ok], expected[ok], atol=1e-9)


def test_summarize(det_cfg):
    s = summarize(run(det_cfg))
    assert s["mean_utility"] == pytest.approx(s["tail_min_utility"])
    assert s["rationality_margin"][1] == pytest.approx(-35 / 11)
    with pytest.raises(ValueError):
        summarize(run(det_cfg), 0.0)


def test_tail_min_excludes_early_shocks():
    doc = instances.net_demand_game(days=4000)
    doc["loads"][0]["distribution"] = [0.8, 0.1, 0.1]
    doc["penalty"]["threshold_multiplier"] = 1.0
    res = run(validate_config(doc))
    s = summarize(res)
    assert res.penalties[:5].any()
    assert s["tail_min_utility"][0] > res.running_utility()[:5, 0].min()


def test_truthful_large_population_rarely_penalised():
    doc = instances.fig2(days=400, loads=500, samples=4000)
    for seed in range(5):
        s = summarize(run(validate_config(doc), seed=seed))
        assert max(s["tail_penalty_fraction"]) < 0.005


def test_zero_horizon_rejected(det_cfg):
    with pytest.raises(ValueError):
        run(det_cfg.replace(days=0))
