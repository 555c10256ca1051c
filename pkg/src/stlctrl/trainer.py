"""Training loops for the neural feedback controller.

train_dropout is the gradient-sampling trainer: it ascends the critical
predicate value (and optionally a waypoint surrogate) through sampled
trajectories, halves the learning rate when the critical-predicate
direction stalls, and falls back to the smooth robustness over a time
partition when even a tiny step fails to improve.  train_vanilla is the
plain smooth-robustness ascent baseline, and train_openloop optimizes a
raw action sequence instead of network weights.
"""

import csv
import math
import time
from dataclasses import dataclass, field

from .plants import DivergedRollout, rollout
from .policy import AdamState, adam_update
from .sampler import build_sampled, grad_critical, grad_smooth, partition_times
from .smooth import SmoothConfig, smooth_robustness
from .stl import Trace, critical, horizon, robustness


@dataclass
class TrainConfig:
    rho_bar: float = 0.0
    eps: float = 1e-5
    M: int = 1
    N: int = 5
    N1: int = 30
    N2: int = 3
    b: float = 15.0
    max_iters: int = 1000
    init_rule: str = "worst"  # or "random"
    alpha: float = 1e-2
    time_sampling: bool = True
    guard_smooth: bool = True
    noise: tuple = None  # (c1, c2) for noisy training rollouts
    max_retries: int = 50

    def __post_init__(self):
        if self.eps <= 0 or min(self.M, self.N, self.N1, self.N2) < 1:
            raise ValueError("eps must be positive and M, N, N1, N2 >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_rule not in ("worst", "random"):
            raise ValueError(f"unknown init rule {self.init_rule!r}")


class WaypointPath:
    """Desired path as (time, target, mask) knots.

    With interpolation on, targets between knots are linear blends and
    times past the ends clamp to the nearest knot; otherwise only exact
    knot times carry a target.
    """

    def __init__(self, knots, interpolate=True):
        if not knots:
            raise ValueError("waypoint path needs at least one knot")
        knots = [(int(t), tuple(tgt), tuple(mask)) for t, tgt, mask in knots]
        if any(b[0] <= a[0] for a, b in zip(knots, knots[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        for _, tgt, mask in knots:
            if len(tgt) != len(mask):
                raise ValueError("target/mask length mismatch")
        self.knots = knots
        self.interpolate = interpolate

    def entry(self, t):
        """(target, mask) at time t, or None."""
        ks = self.knots
        if not self.interpolate:
            for kt, tgt, mask in ks:
                if kt == t:
                    return tgt, mask
            return None
        if t <= ks[0][0]:
            return ks[0][1], ks[0][2]
        if t >= ks[-1][0]:
            return ks[-1][1], ks[-1][2]
        for (t0, g0, _), (t1, g1, m1) in zip(ks, ks[1:]):
            if t0 <= t <= t1:
                w = (t - t0) / (t1 - t0)
                tgt = tuple(a + w * (b - a) for a, b in zip(g0, g1))
                return tgt, m1
        raise AssertionError("unreachable")


def waypoint_objective(smpl, wp):
    """Negative masked squared distance of anchors to the desired path."""
    J = 0.0
    for t, anchor in zip(smpl.times, smpl.anchors):
        e = wp.entry(t)
        if e is None:
            continue
        tgt, mask = e
        for d, m in enumerate(mask):
            if m:
                diff = anchor[d] - tgt[d]
                J = J - diff * diff
    return J


@dataclass
class TrainRecord:
    iter: int
    rho: float
    branch: str
    lr: float
    seconds: float


class TrainLog:
    def __init__(self):
        self.records = []

    def append(self, **kw):
        self.records.append(TrainRecord(**kw))

    def branch_counts(self):
        out = {}
        for r in self.records:
            out[r.branch] = out.get(r.branch, 0) + 1
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "rho", "branch", "lr", "seconds"])
            for r in self.records:
                w.writerow([r.iter, repr(r.rho), r.branch, repr(r.lr),
                            repr(r.seconds)])


def _exact_rho(plant, policy, theta, s0, K, f):
    try:
        r = rollout(plant, policy.with_theta(theta), s0, K)
    except DivergedRollout:
        return -math.inf
    return robustness(f, Trace(r.states))


def _min_rho(plant, policy, theta, init_set, K, f):
    best = None
    worst_s0 = None
    for s0 in init_set.samples:
        rho = _exact_rho(plant, policy, theta, s0, K, f)
        if best is None or rho < best:
            best = rho
            worst_s0 = s0
    return best, worst_s0


def _pick_s0(cfg, rng, init_set, worst_s0):
    if cfg.init_rule == "random" or worst_s0 is None:
        return init_set.samples[rng.randrange(len(init_set.samples))]
    return worst_s0


def train_dropout(plant, policy, f, init_set, wp, cfg, rng):
    """Sampled-gradient training; returns (policy, log, info)."""
    K = horizon(f)
    scfg = SmoothConfig(cfg.b)
    n = len(policy.theta)
    adam1 = AdamState(n, alpha=cfg.alpha)
    adam2 = AdamState(n, alpha=cfg.alpha)
    adam3 = AdamState(n, alpha=cfg.alpha)
    theta = list(policy.theta)
    log = TrainLog()
    retries = 0
    iters = 0
    dnf = True
    best_theta = theta
    best_rho = -math.inf
    t_start = time.time()
    j = 0
    while j < cfg.max_iters:
        min_rho, worst_s0 = _min_rho(plant, policy, theta, init_set, K, f)
        if min_rho > best_rho:
            best_rho, best_theta = min_rho, theta
        if min_rho > cfg.rho_bar:
            dnf = False
            break
        t_iter = time.time()
        s0 = _pick_s0(cfg, rng, init_set, worst_s0)
        try:
            theta_new, branch, lr = _dropout_iteration(
                plant, policy, f, wp, cfg, scfg, rng, theta, s0, K,
                adam1, adam2, adam3)
        except DivergedRollout:
            retries += 1
            if retries > cfg.max_retries:
                raise
            continue
        theta = theta_new
        rho_after = _exact_rho(plant, policy, theta, s0, K, f)
        log.append(iter=j, rho=rho_after, branch=branch, lr=lr,
                   seconds=time.time() - t_iter)
        j += 1
        iters = j
    final_rho, _ = _min_rho(plant, policy, theta, init_set, K, f)
    if final_rho > best_rho:
        best_rho, best_theta = final_rho, theta
    info = {
        "dnf": dnf,
        "iters": iters,
        "branch_counts": log.branch_counts(),
        "final_rho": best_rho,
        "retries": retries,
        "seconds": time.time() - t_start,
    }
    return policy.with_theta(best_theta if dnf else theta), log, info


def _dropout_iteration(plant, policy, f, wp, cfg, scfg, rng, theta, s0, K,
                       adam1, adam2, adam3):
    rho_j = _exact_rho(plant, policy, theta, s0, K, f)
    use_smooth = False
    theta1 = list(theta)
    theta2 = list(theta)
    for _ in range(cfg.N1):
        try:
            ref1 = rollout(plant, policy.with_theta(theta1), s0, K)
            w = critical(f, Trace(ref1.states))
            d1 = grad_critical(ref1, w.time, w.predicate, cfg.N,
                               policy.with_theta(theta1), plant, rng)
            theta1 = adam_update(adam1, theta1, [g / cfg.N1 for g in d1])
        except DivergedRollout:
            pass  # keep theta1; the commit test below filters bad candidates
        if wp is not None:
            try:
                ref2 = rollout(plant, policy.with_theta(theta2), s0, K)
                times = [0] + sorted(rng.sample(range(1, K + 1),
                                                min(cfg.N, K)))
                smpl = build_sampled(ref2, times, policy.with_theta(theta2),
                                     plant)
                J = waypoint_objective(smpl, wp)
                if hasattr(J, "tape"):
                    d2 = smpl.tape.backward(J, smpl.theta_vars)
                else:
                    d2 = [0.0] * len(theta2)
                theta2 = adam_update(adam2, theta2, [g / cfg.N1 for g in d2])
            except DivergedRollout:
                pass

    branch = None
    committed = theta
    lr = 1.0
    if wp is not None and _exact_rho(plant, policy, theta2, s0, K, f) >= rho_j:
        committed, branch = theta2, "waypoint"
    elif _exact_rho(plant, policy, theta1, s0, K, f) >= rho_j:
        committed, branch = theta1, "critical"
    else:
        ell = 1.0
        while not use_smooth:
            ell = ell / 2.0
            hat = [tj + ell * (t1 - tj) for tj, t1 in zip(theta, theta1)]
            if _exact_rho(plant, policy, hat, s0, K, f) >= rho_j:
                committed, branch, lr = hat, "critical", ell
                break
            if ell < cfg.eps:
                use_smooth = True

    if use_smooth:
        theta3 = list(theta)
        for _ in range(cfg.N2):
            try:
                ref3 = rollout(plant, policy.with_theta(theta3), s0, K)
                partition = partition_times(K, cfg.M, rng)
                d3 = grad_smooth(ref3, partition, f, scfg,
                                 policy.with_theta(theta3), plant)
                theta3 = adam_update(adam3, theta3, [g / cfg.N2 for g in d3])
            except DivergedRollout:
                break
        branch, lr = "smooth", 1.0
        if cfg.guard_smooth and _exact_rho(plant, policy, theta3, s0, K, f) < rho_j:
            committed = theta  # keep the incumbent rather than regress
        else:
            committed = theta3
    return committed, branch, lr


def train_vanilla(plant, policy, f, init_set, cfg, rng):
    """Smooth-robustness gradient ascent baseline."""
    K = horizon(f)
    scfg = SmoothConfig(cfg.b)
    adam = AdamState(len(policy.theta), alpha=cfg.alpha)
    theta = list(policy.theta)
    log = TrainLog()
    retries = 0
    dnf = True
    iters = 0
    best_theta = theta
    best_rho = -math.inf
    t_start = time.time()
    j = 0
    while j < cfg.max_iters:
        min_rho, worst_s0 = _min_rho(plant, policy, theta, init_set, K, f)
        if min_rho > best_rho:
            best_rho, best_theta = min_rho, theta
        if min_rho >= cfg.rho_bar:
            dnf = False
            break
        t_iter = time.time()
        s0 = _pick_s0(cfg, rng, init_set, worst_s0)
        noise = None
        if cfg.noise is not None:
            noise = (cfg.noise[0], cfg.noise[1], rng)
        try:
            ref = rollout(plant, policy.with_theta(theta), s0, K, noise=noise)
            if cfg.time_sampling and cfg.M > 1:
                partition = partition_times(K, cfg.M, rng)
            else:
                partition = [list(range(K + 1))]
            d = grad_smooth(ref, partition, f, scfg,
                            policy.with_theta(theta), plant)
            theta = adam_update(adam, theta, d)
            rho_after = _exact_rho(plant, policy, theta, s0, K, f)
        except DivergedRollout:
            retries += 1
            if retries > cfg.max_retries:
                raise
            continue
        log.append(iter=j, rho=rho_after, branch="smooth", lr=1.0,
                   seconds=time.time() - t_iter)
        j += 1
        iters = j
    final_rho, _ = _min_rho(plant, policy, theta, init_set, K, f)
    if final_rho > best_rho:
        best_rho, best_theta = final_rho, theta
    info = {
        "dnf": dnf,
        "iters": iters,
        "branch_counts": log.branch_counts(),
        "final_rho": best_rho,
        "retries": retries,
        "seconds": time.time() - t_start,
    }
    return policy.with_theta(best_theta if dnf else theta), log, info


class _OpenLoop:
    """Adapter presenting a raw action sequence as a per-step policy."""

    def __init__(self, actions):
        self.theta = [a for step in actions for a in step]
        self.m = len(actions[0])

    def with_theta(self, theta):
        m = self.m
        return _OpenLoop([theta[i:i + m] for i in range(0, len(theta), m)])

    def forward(self, s, k, theta=None):
        th = self.theta if theta is None else theta
        return list(th[k * self.m:(k + 1) * self.m])


def train_openloop(plant, actions, f, s0, cfg, rng):
    """Optimize the raw action sequence itself; returns (actions, log, info).

    actions is a K x action_dim list of raw (pre-squash) inputs.
    """
    K = horizon(f)
    if len(actions) != K:
        raise ValueError(f"need {K} action rows, got {len(actions)}")
    ol = _OpenLoop(actions)
    scfg = SmoothConfig(cfg.b)
    adam = AdamState(len(ol.theta), alpha=cfg.alpha)
    theta = list(ol.theta)
    log = TrainLog()
    dnf = True
    iters = 0
    best_theta = theta
    best_rho = -math.inf
    retries = 0
    t_start = time.time()
    j = 0
    while j < cfg.max_iters:
        rho_clean = _exact_rho(plant, ol, theta, s0, K, f)
        if rho_clean > best_rho:
            best_rho, best_theta = rho_clean, theta
        if rho_clean >= cfg.rho_bar:
            dnf = False
            break
        t_iter = time.time()
        noise = None
        if cfg.noise is not None:
            noise = (cfg.noise[0], cfg.noise[1], rng)
        try:
            ref = rollout(plant, ol.with_theta(theta), s0, K,
                          mode="differentiable", noise=noise)
            out = smooth_robustness(f, Trace(ref.states), scfg)
            d = ref.tape.backward(out, ref.theta_vars)
            theta = adam_update(adam, theta, d)
        except DivergedRollout:
            retries += 1
            if retries > cfg.max_retries:
                raise
            continue
        log.append(iter=j, rho=rho_clean, branch="smooth", lr=1.0,
                   seconds=time.time() - t_iter)
        j += 1
        iters = j
    rho_clean = _exact_rho(plant, ol, theta, s0, K, f)
    if rho_clean > best_rho:
        best_rho, best_theta = rho_clean, theta
    final = best_theta if dnf else theta
    m = ol.m
    out_actions = [final[i:i + m] for i in range(0, len(final), m)]
    info = {
        "dnf": dnf,
        "iters": iters,
        "branch_counts": log.branch_counts(),
        "final_rho": best_rho,
        "retries": retries,
        "seconds": time.time() - t_start,
    }
    return out_actions, log, info
