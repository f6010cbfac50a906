import numpy as np
import pytest
from numpy.testing import assert_allclose

from bangbang_ipeps.container import read_json
from bangbang_ipeps.optimize import (
    Checkpoint,
    CostFunction,
    angle_bounds,
    energy_floor,
    nelder_mead,
    optimize_bb,
    pad_sequence,
    pattern_search,
    scan_dt,
)
from bangbang_ipeps.sequences import bb_sequence
from bangbang_ipeps.settings import OptimizerOptions

TARGET = np.array([0.3, -0.2, 0.5, 0.1])


def bowl(x):
    return float(np.sum((np.asarray(x) - TARGET) ** 2))


def rastrigin(x):
    x = np.asarray(x)
    return float(10 * x.size + np.sum(x**2 - 10 * np.cos(2 * np.pi * x)))


def fake_evaluator(seq):
    """Quadratic stand-in for the iPEPS energy, minimum -1 at all angles 0.1."""
    return sum((a - 0.1) ** 2 for a in seq.angles) - 1.0, 0.0


def test_nelder_mead_finds_the_bowl_minimum():
    opts = OptimizerOptions(xtol=1e-8, ftol=1e-20, max_evals=5000)
    x, f, trace = nelder_mead(bowl, np.zeros(4), opts)
    assert_allclose(x, TARGET, atol=1e-6)
    assert f < 1e-11
    assert trace.termination == "tolerance"
    assert np.all(np.diff(trace.best_energy) <= 0)
    # step records the simplex diameter
    assert trace.step[-1] <= opts.xtol < trace.step[0]


def test_nelder_mead_stops_on_flat_energies():
    opts = OptimizerOptions(xtol=1e-12, ftol=1e-8)
    _, f, trace = nelder_mead(lambda v: 1.0, np.zeros(3), opts)
    assert f == 1.0
    assert trace.termination == "tolerance"
    assert len(trace.best_energy) == 1
    assert trace.step[0] > opts.xtol


def test_nelder_mead_stays_in_bounds():
    seen = []

    def cost(v):
        seen.append(np.array(v))
        return float((v[0] - 10.0) ** 2 + v[1] ** 2)

    x, _, trace = nelder_mead(cost, [0.0, 0.5], OptimizerOptions(), bounds=[(-1.0, 1.0)] * 2)
    assert np.all(np.abs(np.array(seen)) <= 1.0)
    assert x[0] > 0.99
    assert trace.n_evals == len(seen)


def test_nelder_mead_budget_flag():
    x0 = np.zeros(4)
    x, f, trace = nelder_mead(bowl, x0, OptimizerOptions(max_evals=10))
    assert trace.budget_exhausted
    assert f <= bowl(x0)


def test_pattern_search_escapes_a_local_minimum():
    opts = OptimizerOptions(mesh0=1.0)
    x, f, trace = pattern_search(rastrigin, [1.0, 1.0], opts, [(-5.12, 5.12)] * 2)
    assert_allclose(x, [0.0, 0.0], atol=1e-12)
    assert f < 1e-12
    assert trace.termination == "mesh"
    assert np.all(np.diff(trace.best_energy) <= 0)


def test_pattern_search_is_deterministic_with_workers():
    serial = pattern_search(bowl, np.zeros(4), OptimizerOptions())
    parallel = pattern_search(bowl, np.zeros(4), OptimizerOptions(workers=3))
    assert_allclose(serial[0], parallel[0])
    assert serial[2].best_energy == parallel[2].best_energy


def test_pattern_search_respects_bounds():
    x, _, _ = pattern_search(lambda v: float((v[0] - 10.0) ** 2), [0.0],
                             OptimizerOptions(mesh0=0.5), [(-1.0, 1.0)])
    assert x[0] == pytest.approx(1.0)


def test_pattern_search_keeps_a_better_infeasible_start():
    x, f, trace = pattern_search(lambda v: float((v[0] - 2.0) ** 2), [2.0], OptimizerOptions(),
                                 [(-np.pi / 2, np.pi / 2)])
    assert f == 0.0
    assert x[0] == 2.0
    assert max(trace.best_energy) == 0.0


def test_angle_bounds():
    bounds = angle_bounds(2, 2.0)
    assert bounds[0] == pytest.approx((-np.pi / 2, np.pi / 2))
    assert bounds[3] == pytest.approx((-np.pi / 2, np.pi / 2))
    assert len(bounds) == 4


def test_scan_dt_refines_an_interior_minimum():
    result = scan_dt(2, np.linspace(0.05, 0.6, 12), energy_fn=lambda dt: ((dt - 0.3) ** 2 - 1.5, 0.0))
    assert result.interior_minimum
    assert result.dt_star == pytest.approx(0.3, abs=1e-3)
    assert result.energy_star == pytest.approx(-1.5, abs=1e-6)
    assert result.curve[0][0] == pytest.approx(4 * 0.05)


def test_scan_dt_flags_an_edge_minimum():
    result = scan_dt(3, [0.1, 0.2, 0.3], energy_fn=lambda dt: (-dt, 0.0))
    assert not result.interior_minimum
    assert result.energy_star <= -0.3


def test_padding_preserves_the_circuit():
    seq = bb_sequence([0.1, 0.2], [0.3, 0.4], g_or_gc=2.0)
    padded = pad_sequence(seq)
    assert padded.N == 3
    assert_allclose(list(padded.layers())[:2], list(seq.layers()))
    assert list(padded.layers())[2] == (0.0, 0.0)


def test_cost_function_caches_and_flags_taint():
    calls = []

    def evaluator(seq):
        calls.append(seq.angles)
        return 0.5, 1e-3

    cost = CostFunction(bb_sequence([0.0], [0.0]), D_max=8, chi=40, evaluator=evaluator)
    assert cost([0.1, 0.2]) == 0.5
    assert cost([0.1, 0.2 + 1e-14]) == 0.5
    assert len(calls) == 1
    assert cost.evaluations[0].tainted


def test_optimize_bb_with_checkpoints(tmp_path):
    template = bb_sequence([0.0, 0.0], [0.0, 0.0])
    cost = CostFunction(template, D_max=8, chi=40, evaluator=fake_evaluator)
    seq, energy, report = optimize_bb(2, ["ap_seed", "random"], ap_dt=0.05, cost=cost,
                                      checkpoint_dir=tmp_path, seed=3)
    assert energy == pytest.approx(-1.0, abs=1e-6)
    assert seq.kind == "BB" and seq.N == 2
    assert not report.tainted
    assert not report.below_floor
    assert set(report.energies) == {"ap_seed", "random"}
    assert report.energy == min(report.energies.values())
    ckpt = read_json(tmp_path / "checkpoint_N2_random.json", Checkpoint)
    assert ckpt.stage == "pattern-search"

    resumed, energy2, _ = optimize_bb(2, "random", cost=cost, checkpoint_dir=tmp_path,
                                      resume=True, seed=3)
    assert energy2 <= ckpt.f_best + 1e-12


def test_warm_start_needs_the_previous_depth():
    cost = CostFunction(bb_sequence([0.0] * 3, [0.0] * 3), D_max=8, chi=40,
                        evaluator=fake_evaluator)
    with pytest.raises(ValueError, match="warm_start"):
        optimize_bb(3, "warm_start", cost=cost)
    previous = bb_sequence([0.1, 0.1], [0.2, 0.1])
    seq, energy, _ = optimize_bb(3, "warm_start", cost=cost, previous=previous)
    assert energy == pytest.approx(-1.0, abs=1e-6)


def test_unknown_strategy():
    with pytest.raises(ValueError, match="strategy"):
        optimize_bb(2, "annealing")


def test_optimize_bb_returns_angles_inside_the_box():
    def evaluator(seq):
        return sum((a - 2.0) ** 2 for a in seq.angles), 0.0

    cost = CostFunction(bb_sequence([0.0, 0.0], [0.0, 0.0]), D_max=8, chi=40, evaluator=evaluator)
    seq, _, _ = optimize_bb(2, "ap_seed", ap_dt=0.05, cost=cost)
    for angle, (lo, hi) in zip(seq.angles, angle_bounds(2, 3.1)):
        assert lo <= angle <= hi
    assert seq.beta == pytest.approx([np.pi / 2] * 2, abs=1e-3)


def test_interrupt_leaves_an_interrupted_checkpoint(tmp_path):
    def evaluator(seq):
        if len(cost.evaluations) >= 25:
            raise KeyboardInterrupt
        return fake_evaluator(seq)

    cost = CostFunction(bb_sequence([0.0, 0.0], [0.0, 0.0]), D_max=8, chi=40, evaluator=evaluator)
    with pytest.raises(KeyboardInterrupt):
        optimize_bb(2, "ap_seed", ap_dt=0.05, cost=cost, checkpoint_dir=tmp_path)
    ckpt = read_json(tmp_path / "checkpoint_N2_ap_seed.json", Checkpoint)
    assert ckpt.stage == "interrupted"
    assert ckpt.n_evals == 25
    assert ckpt.f_best == min(e.energy for e in cost.evaluations)
    assert cost(ckpt.x_best) == ckpt.f_best


def test_energy_below_the_floor_is_flagged():
    def evaluator(seq):
        return sum((a - 0.1) ** 2 for a in seq.angles) - 2.0, 0.0

    cost = CostFunction(bb_sequence([0.0, 0.0], [0.0, 0.0]), D_max=8, chi=40, evaluator=evaluator)
    _, energy, report = optimize_bb(2, "ap_seed", ap_dt=0.05, cost=cost)
    assert energy < energy_floor("para_target", 3.1)
    assert report.below_floor


def test_energy_floor():
    assert energy_floor("para_target", 3.1) == pytest.approx(-1.6422386)
    assert energy_floor("para_to_ferro", 3.04438) == -1.0
    assert energy_floor("para_target", 2.0) is None


def test_optimize_bb_is_deterministic_for_a_seed():
    def run():
        cost = CostFunction(bb_sequence([0.0, 0.0], [0.0, 0.0]), D_max=8, chi=40,
                            evaluator=fake_evaluator)
        return optimize_bb(2, "random", cost=cost, seed=11)

    (seq1, e1, r1), (seq2, e2, r2) = run(), run()
    assert seq1.angles == seq2.angles
    assert e1 == e2
    assert [t.best_energy for t in r1.traces] == [t.best_energy for t in r2.traces]
    assert r1.n_evals == r2.n_evals
