import math
import random

import pytest

from stlctrl.plants import InitialSet, builtin, rollout
from stlctrl.policy import Policy, init
from stlctrl.sampler import build_sampled
from stlctrl.stl import Trace, parse, robustness
from stlctrl.trainer import (
    TrainConfig, TrainLog, WaypointPath, train_dropout, train_openloop,
    train_vanilla, waypoint_objective,
)


def _point_set(s0):
    return InitialSet(s0, s0, [s0])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(eps=0.0)
    with pytest.raises(ValueError):
        TrainConfig(N1=0)
    with pytest.raises(ValueError):
        TrainConfig(max_iters=0)
    with pytest.raises(ValueError):
        TrainConfig(init_rule="best")


def test_waypoint_path_interpolation():
    wp = WaypointPath([(0, (0.0, 0.0), (1, 1)), (10, (1.0, 2.0), (1, 1))])
    tgt, mask = wp.entry(5)
    assert tgt == (0.5, 1.0)
    assert wp.entry(0)[0] == (0.0, 0.0)
    assert wp.entry(99)[0] == (1.0, 2.0)
    discrete = WaypointPath([(3, (1.0,), (1,))], interpolate=False)
    assert discrete.entry(2) is None
    assert discrete.entry(3) == ((1.0,), (1,))
    with pytest.raises(ValueError):
        WaypointPath([])
    with pytest.raises(ValueError):
        WaypointPath([(0, (0.0,), (1,)), (0, (1.0,), (1,))])


def test_waypoint_objective_values():
    plant = builtin("integrator2d")
    pol = init([3, 4, 2], scheme="zero")
    ref = rollout(plant, pol, (2.0, 0.0), 4)
    smpl = build_sampled(ref, [0, 2, 4], pol, plant)
    # anchors sit at (2,0); target 5 in dim 0 only
    wp = WaypointPath([(2, (5.0, 99.0), (1, 0))], interpolate=False)
    J = waypoint_objective(smpl, wp)
    val = J.value if hasattr(J, "value") else J
    assert val == pytest.approx(-9.0)
    on_target = WaypointPath([(2, (2.0, 0.0), (1, 1))], interpolate=False)
    J0 = waypoint_objective(smpl, on_target)
    assert (J0.value if hasattr(J0, "value") else J0) == pytest.approx(0.0)


def test_waypoint_objective_gradient_fd():
    plant = builtin("dubins")
    pol = init([3, 4, 2], rng=random.Random(5))
    ref = rollout(plant, pol, (0.0, 0.0), 6)
    wp = WaypointPath([(0, (0.0, 0.0), (1, 1)), (6, (1.0, 1.0), (1, 1))])
    times = list(range(7))  # full sampling: sampled gradient is exact
    smpl = build_sampled(ref, times, pol, plant)
    J = waypoint_objective(smpl, wp)
    g = smpl.tape.backward(J, smpl.theta_vars)
    h = 1e-6
    for idx in [0, 7, len(pol.theta) - 1]:
        vals = []
        for delta in (h, -h):
            th = list(pol.theta)
            th[idx] += delta
            p2 = pol.with_theta(th)
            r2 = rollout(plant, p2, (0.0, 0.0), 6)
            s2 = build_sampled(r2, times, p2, plant)
            Jv = waypoint_objective(s2, wp)
            vals.append(Jv.value if hasattr(Jv, "value") else Jv)
        fd = (vals[0] - vals[1]) / (2 * h)
        assert g[idx] == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_already_satisfying_returns_immediately():
    plant = builtin("integrator2d")
    pol = init([3, 4, 2], scheme="zero")
    f = parse("G[0,5](x0 < 10)")
    iset = _point_set((0.0, 0.0))
    cfg = TrainConfig(max_iters=5, N1=2, N2=1)
    for fn in (train_dropout, train_vanilla):
        args = (plant, pol, f, iset)
        if fn is train_dropout:
            out_pol, log, info = fn(plant, pol, f, iset, None, cfg,
                                    random.Random(0))
        else:
            out_pol, log, info = fn(plant, pol, f, iset, cfg, random.Random(0))
        assert info["iters"] == 0
        assert not info["dnf"]
        assert out_pol.theta == pol.theta
        assert log.records == []


def test_vanilla_zero_gradient_is_dnf():
    # plant ignores the action entirely
    from stlctrl.plants import Plant
    plant = Plant("inert", 1, 2, 1.0, lambda s, u, dt: (s[0],), lambda a: a)
    pol = init([2, 3, 2], rng=random.Random(1))
    f = parse("F[0,3](x0 > 5)")
    cfg = TrainConfig(max_iters=10, time_sampling=False)
    out_pol, log, info = train_vanilla(plant, pol, f, _point_set((0.0,)), cfg,
                                       random.Random(0))
    assert info["dnf"]
    assert out_pol.theta == pol.theta


def test_vanilla_solves_simple_reach():
    plant = builtin("integrator2d")
    pol = init([3, 6, 2], rng=random.Random(2))
    f = parse("F[8,10](x0 > 0.5 && x1 > 0.5) && G[0,10](x0 > -2 && x1 > -2)")
    cfg = TrainConfig(max_iters=400, alpha=0.05, b=10.0, time_sampling=False)
    out_pol, log, info = train_vanilla(plant, pol, f, _point_set((-1.0, -1.0)),
                                       cfg, random.Random(0))
    assert not info["dnf"]
    r = rollout(plant, out_pol, (-1.0, -1.0), 10)
    assert robustness(f, Trace(r.states)) >= 0.0
    assert all(rec.branch == "smooth" for rec in log.records)


def test_dropout_solves_simple_reach():
    plant = builtin("integrator2d")
    pol = init([3, 6, 2], rng=random.Random(2))
    f = parse("F[8,10](x0 > 0.5 && x1 > 0.5) && G[0,10](x0 > -2 && x1 > -2)")
    cfg = TrainConfig(max_iters=150, alpha=0.05, b=10.0, M=3, N=4, N1=5, N2=2,
                      rho_bar=0.0)
    wp = WaypointPath([(0, (-1.0, -1.0), (1, 1)), (10, (0.8, 0.8), (1, 1))])
    out_pol, log, info = train_dropout(plant, pol, f, _point_set((-1.0, -1.0)),
                                       wp, cfg, random.Random(0))
    assert not info["dnf"]
    r = rollout(plant, out_pol, (-1.0, -1.0), 10)
    assert robustness(f, Trace(r.states)) > 0.0
    assert set(info["branch_counts"]) <= {"waypoint", "critical", "smooth"}
    assert sum(info["branch_counts"].values()) == info["iters"]


def test_dropout_commits_are_monotone_on_singleton():
    plant = builtin("scalar_power")
    pol = Policy([1, 1], theta=[0.49698, 0.0], include_time=False)
    f = parse("F[0,45](G[0,5](x0 > 0)) && G[6,50](1 - 10*x0 > 0)")
    cfg = TrainConfig(max_iters=25, N=3, N1=4, N2=2, M=5, alpha=0.02,
                      rho_bar=100.0)  # unreachable bar: runs all iterations
    out_pol, log, info = train_dropout(plant, pol, f, _point_set((1.15,)),
                                       None, cfg, random.Random(1))
    rhos = [rec.rho for rec in log.records]
    assert info["dnf"]
    for a, b in zip(rhos, rhos[1:]):
        assert b >= a - 1e-12


def test_dropout_max_iters_dnf_returns_best():
    plant = builtin("dubins")
    pol = init([3, 4, 2], rng=random.Random(3))
    f = parse("F[4,5](x0 > 1e6)")  # unreachable
    cfg = TrainConfig(max_iters=3, N1=2, N2=1, M=2, N=2)
    out_pol, log, info = train_dropout(plant, pol, f, _point_set((0.0, 0.0)),
                                       None, cfg, random.Random(0))
    assert info["dnf"]
    assert info["iters"] == 3
    assert math.isfinite(info["final_rho"])


def test_openloop_one_step_interior_optimum():
    plant = builtin("integrator2d")
    # band around x0 = 0.2 after one step; optimum u = (2, 0) is interior
    f = parse("G[1,1](x0 > 0.1 && x0 < 0.3)")
    cfg = TrainConfig(max_iters=3000, alpha=0.05, b=20.0, rho_bar=0.099)
    actions, log, info = train_openloop(plant, [[0.0, 0.0]], f, (0.0, 0.0),
                                        cfg, random.Random(0))
    assert not info["dnf"]
    u = plant.squash(actions[0])
    assert 0.1 * u[0] == pytest.approx(0.2, abs=1e-3)
    assert info["final_rho"] == pytest.approx(0.1, abs=1e-3)


def test_openloop_zero_budget_keeps_actions():
    plant = builtin("integrator2d")
    f = parse("G[1,1](x0 > 100)")
    cfg = TrainConfig(max_iters=1)
    actions, log, info = train_openloop(plant, [[0.3, -0.4]], f, (0.0, 0.0),
                                        cfg, random.Random(0))
    assert info["dnf"]
    # best-so-far is the (only slightly updated) sequence; shape preserved
    assert len(actions) == 1 and len(actions[0]) == 2


def test_log_csv_format(tmp_path):
    log = TrainLog()
    log.append(iter=0, rho=-1.5, branch="critical", lr=1.0, seconds=0.25)
    log.append(iter=1, rho=0.5, branch="smooth", lr=0.5, seconds=0.5)
    path = tmp_path / "log.csv"
    log.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,rho,branch,lr,seconds"
    assert lines[1].startswith("0,-1.5,critical,")
    assert log.branch_counts() == {"critical": 1, "smooth": 1}
