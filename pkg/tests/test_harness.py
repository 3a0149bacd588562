import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qasbias.engine import build_diagonal, evolve, sample_indices
from qasbias.errors import ModeError, ParameterError
from qasbias.exact_cover import ProblemInstance, cost_vector, generate_instance
from qasbias.harness import (
    CellAggregate,
    ExperimentConfig,
    ResultRecord,
    aggregate,
    enhancement_factor,
    instance_seed,
    iterative_annealing,
    mean_sem,
    per_instance_scatter,
    problem_model,
    run_experiment,
    solved_instance_count,
    time_to_solution,
)
from qasbias.seeds import derive_seed, splitmix64


def rec(alpha, p, d=None, tau=1.0, n=8, mode="shots", count=None, error=None):
    if count is None and mode == "shots" and error is None:
        count = round(p * 30)
    return ResultRecord(n, alpha, d, tau, 1.0, mode, 30, 10, count, p, 4 * (1 - p), 0.4 * (1 - p), 0, error=error)


def cell(p, sem):
    return CellAggregate(8, 0, 1.0, 10, p, sem, None, None, None, None, None)


# -- seeds ------------------------------------------------------------------

def test_splitmix_reference_value():
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_derive_seed_distinct_and_stable():
    seeds = {derive_seed(7, "instance", n, a) for n in range(8, 27, 2) for a in range(1, 101)}
    assert len(seeds) == 1000
    assert derive_seed(7, "bias", None) == derive_seed(7, "bias", None)
    assert derive_seed(7, "shots", 1, 1.0) != derive_seed(7, "shots", 1, 15.0)


# -- statistics -------------------------------------------------------------

def test_aggregate_examples():
    a, = aggregate([rec(1, 0.0), rec(2, 1.0)])
    assert a.p_mean == 0.5 and a.p_sem == 0.5
    a, = aggregate([rec(i, 0.3) for i in range(1, 6)])
    assert a.p_mean == pytest.approx(0.3) and a.p_sem == pytest.approx(0.0, abs=1e-15)
    a, = aggregate([rec(1, 0.4)])
    assert a.p_mean == 0.4 and a.p_sem is None
    a, = aggregate([rec(1, math.nan, error="boom")])
    assert a.missing and a.p_mean is None


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_aggregate_mean_bounds(ps):
    a, = aggregate([rec(i, p, mode="exact") for i, p in enumerate(ps)])
    assert min(ps) - 1e-12 <= a.p_mean <= max(ps) + 1e-12
    assert a.p_sem is None or a.p_sem >= 0
    if len(ps) > 1:
        assert a.p_sem == pytest.approx(np.std(ps, ddof=1) / math.sqrt(len(ps)), abs=1e-12)


def test_mean_sem_empty():
    assert mean_sem([]) == (None, None)


def test_enhancement_examples():
    e = enhancement_factor(cell(0.52, 0.02), cell(0.20, 0.01))
    assert e.value == pytest.approx(2.6)
    assert e.error == pytest.approx(2.6 * math.sqrt((0.02 / 0.52) ** 2 + (0.01 / 0.20) ** 2))
    assert round(e.error, 2) == 0.16
    assert enhancement_factor(cell(0.3, 0.01), cell(0.3, 0.01)).value == 1.0
    z = enhancement_factor(cell(0.3, 0.01), cell(0.0, 0.0))
    assert z.unbounded and z.value is None and str(z) == "unbounded"


@given(st.floats(1e-6, 1), st.floats(0, 0.5))
def test_enhancement_self_is_one(p, sem):
    assert enhancement_factor(cell(p, sem), cell(p, sem)).value == 1.0


def test_solved_instance_count():
    assert solved_instance_count([rec(a, 0.0) for a in range(1, 11)]) == 0
    assert solved_instance_count([rec(a, 0.1) for a in range(1, 11)]) == 10
    mixed = [rec(a, 1 / 30 if a <= 47 else 0.0) for a in range(1, 101)]
    assert solved_instance_count(mixed) == 47
    with pytest.raises(ModeError):
        solved_instance_count([rec(1, 0.5, mode="exact")])


def test_scatter_examples(caplog):
    rs = [rec(a, 0.2) for a in range(1, 6)] + [rec(a, 0.2, d=0) for a in range(1, 6)]
    sc = per_instance_scatter(rs, 0, 1.0)
    assert len(sc.pairs) == 5 and sc.improved == 0
    rs = [rec(a, 0.2) for a in range(1, 4)] + [rec(a, 0.5, d=0) for a in range(4, 7)]
    with caplog.at_level(logging.WARNING):
        sc = per_instance_scatter(rs, 0, 1.0)
    assert sc.pairs == [] and sc.skipped == 6
    assert "no paired instances" in caplog.text


def test_time_to_solution():
    assert time_to_solution(0.0, 1.0) == math.inf
    assert time_to_solution(1.0, 1.0, 5.0) == 6.0
    assert time_to_solution(0.5, 1.0) == pytest.approx(math.log(0.01) / math.log(0.5))


# -- config -----------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig(sizes=[8], distances=[None, 8])
    with pytest.raises(ParameterError):
        ExperimentConfig(anneals=0)
    with pytest.raises(ParameterError):
        ExperimentConfig(instances_per_size=0)
    with pytest.raises(ParameterError):
        ExperimentConfig(mode="fast")
    cfg = ExperimentConfig(sizes=[8, 10], taus=[1], distances=[None, 1])
    assert ExperimentConfig.from_dict({"config": cfg.to_dict()}) == cfg
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"sizes": [8], "bogus": 1})


def test_defaults_follow_protocol():
    cfg = ExperimentConfig()
    assert cfg.instances_per_size == 100 and cfg.anneals == 30
    assert cfg.taus == [1.0, 15.0]
    assert cfg.distances == [None, 0, 1, 2, 3]


# -- sweeps -----------------------------------------------------------------

def test_structural_sweep_500_cells():
    cfg = ExperimentConfig(sizes=[8], instances_per_size=100, anneals=30, taus=[0.0003],
                           distances=[None, 0, 1, 2, 3], seed=1)
    table = run_experiment(cfg)
    assert len(table.records) == 500
    assert not table.partial
    for r in table.records:
        assert 0 <= r.p <= 1
        assert r.p == r.success_count / 30
        assert r.cost_per_clause == pytest.approx(r.mean_cost / r.m)
    aggs = table.aggregates()
    assert len(aggs) == 5 and all(a.count == 100 for a in aggs)
    assert len(table.enhancements()) == 4


def test_adiabatic_limit_exact_mode():
    cfg = ExperimentConfig(sizes=[5], instances_per_size=3, taus=[0.3], distances=[None, 0], mode="exact")
    table = run_experiment(cfg)
    for r in table.records:
        assert r.p > 0.995
        assert r.mean_cost < 0.05


def test_shot_values_on_grid():
    cfg = ExperimentConfig(sizes=[8], instances_per_size=10, taus=[0.0005], distances=[None, 0, 2], seed=3)
    for r in run_experiment(cfg).records:
        assert r.success_count == pytest.approx(r.p * 30)
        assert float(r.p * 30).is_integer()


def test_sweep_is_deterministic_across_threads():
    cfg = ExperimentConfig(sizes=[6, 8], instances_per_size=4, taus=[0.0004, 0.001], distances=[None, 1], seed=9)
    a = run_experiment(cfg)
    cfg2 = ExperimentConfig(**{**cfg.to_dict(), "threads": 3})
    b = run_experiment(cfg2)
    assert a.results_csv() == b.results_csv()
    assert a.aggregate_csv() == b.aggregate_csv()
    assert a.scatter_csv() == b.scatter_csv()


def test_cell_replays_in_isolation():
    cfg = ExperimentConfig(sizes=[7], instances_per_size=3, taus=[0.0005], distances=[None, 1], seed=5)
    table = run_experiment(cfg)
    r = next(r for r in table.records if r.alpha == 3 and r.d is None)
    inst = generate_instance(7, instance_seed(5, 7, 3))
    state = evolve(build_diagonal(problem_model(inst)), cfg.make_schedule(0.0005))
    shots = sample_indices(state, 30, r.shot_seed)
    assert int(np.count_nonzero(shots == inst.solution.to_int())) == r.success_count
    assert float(cost_vector(inst)[shots].mean()) == r.mean_cost


def test_failed_cells_are_recorded():
    bad = ProblemInstance(6, ((0, 1, 2),))  # no stored solution
    cfg = ExperimentConfig(sizes=[6], instances_per_size=2, taus=[0.0005], distances=[None, 0])
    table = run_experiment(cfg, instances={(6, 1): bad})
    assert table.partial
    errs = [r for r in table.records if r.error]
    assert {r.alpha for r in errs} == {1} and len(errs) == 2
    assert all(a.count == 1 for a in table.aggregates())
    assert "ParameterError" in table.results_csv()


def test_d0_beats_unbiased_on_every_instance():
    cfg = ExperimentConfig(sizes=[10], instances_per_size=8, taus=[0.001], distances=[None, 0],
                           mode="exact", seed=2)
    sc = per_instance_scatter(run_experiment(cfg).records, 0, 0.001)
    assert sc.improved == 8


def test_joint_scaling_keeps_fields_in_box():
    from qasbias.harness import cell_bias
    inst = generate_instance(8, 1)
    cfg = ExperimentConfig(sizes=[8], joint_scaling=True, bias_strength=1.0)
    model, bias = cell_bias(cfg, inst, problem_model(inst), 2, 0)
    total = np.array(model.fields) - np.array(bias.mu)
    assert np.all(np.abs(total) <= 2 + 1e-12)
    assert max(abs(total).max() / 2, max(model.couplings.values())) == pytest.approx(1.0)


# -- iterative scheme -------------------------------------------------------

def test_iterative_single_round_is_plain_qas():
    inst = generate_instance(8, 4)
    cfg = ExperimentConfig(sizes=[8], taus=[0.0005], distances=[None], seed=1)
    trace = iterative_annealing(inst, cfg, 1, seed=77)
    assert len(trace.rounds) == 1 and trace.rounds[0].bias_source is None
    state = evolve(build_diagonal(problem_model(inst)), cfg.make_schedule(0.0005))
    shots = sample_indices(state, 30, derive_seed(77, "iterate", 0))
    costs = cost_vector(inst)[shots]
    assert trace.rounds[0].round_best_cost == costs.min()
    assert trace.rounds[0].round_best.to_int() == shots[costs == costs.min()].min()


def test_iterative_stops_when_round0_solves():
    inst = generate_instance(6, 2)
    cfg = ExperimentConfig(sizes=[6], taus=[0.3], distances=[None])
    trace = iterative_annealing(inst, cfg, 5)
    assert len(trace.rounds) == 1 and trace.solved


@pytest.mark.parametrize("carry, pick", [(True, "lowest"), (False, "lowest"), (False, "last")])
def test_iterative_trace_shape(carry, pick):
    cfg = ExperimentConfig(sizes=[9], taus=[0.0003], distances=[None], anneals=5)
    inst = generate_instance(9, 6)
    trace = iterative_annealing(inst, cfg, 4, seed=3, carry_best=carry, pick=pick)
    assert 1 <= len(trace.rounds) <= 4
    for prev, cur in zip(trace.rounds, trace.rounds[1:]):
        assert cur.bias_source is not None
        assert cur.best_cost <= prev.best_cost
        assert cur.best_cost <= cur.round_best_cost
    if trace.solved:
        assert trace.rounds[-1].round_best == inst.solution


def test_iterative_requires_shot_mode():
    cfg = ExperimentConfig(sizes=[6], mode="exact", distances=[None])
    with pytest.raises(ModeError):
        iterative_annealing(generate_instance(6, 0), cfg, 2)
