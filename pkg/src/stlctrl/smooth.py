"""Smooth lower bound of the robustness, differentiable on the tape.

min is replaced by softmin(x) = -(1/b) ln(sum_i e^{-b x_i}) and max by
the weighted mean softmax_lb(x) = sum_i x_i e^{b x_i} / sum_i e^{b x_i}.
Both are below the exact extremum, so a positive smooth value still
certifies satisfaction.  Inputs are shifted by the running extremum
before exponentiation; the shift is mathematically exact for both
aggregations, it only prevents overflow.
"""

from dataclasses import dataclass

from .autodiff import exp, ln, value_of
from .stl import (
    Always, And, Eventually, Or, Pred, Release, Until, horizon, HorizonError,
)


@dataclass(frozen=True)
class SmoothConfig:
    b: float = 15.0

    def __post_init__(self):
        if not self.b > 0.0:
            raise ValueError("smoothing sharpness b must be positive")


def softmin(xs, b):
    if len(xs) == 1:
        return xs[0]
    m = min(value_of(x) for x in xs)
    acc = None
    for x in xs:
        e = exp((m - x) * b)
        acc = e if acc is None else acc + e
    return m - ln(acc) / b


def softmax_lb(xs, b):
    if len(xs) == 1:
        return xs[0]
    m = max(value_of(x) for x in xs)
    num = None
    den = None
    for x in xs:
        w = exp((x - m) * b)
        num = x * w if num is None else num + x * w
        den = w if den is None else den + w
    return num / den


def smooth_robustness(f, tr, cfg=SmoothConfig()):
    """Smooth robustness of f over tr at time 0.

    tr is an stl.Trace whose states may hold tape Vars, plain floats, or
    a mix (frozen positions stay constant, gradients flow through Vars).
    """
    if horizon(f) > tr.K:
        raise HorizonError(
            f"formula horizon {horizon(f)} exceeds trace length K={tr.K}")
    return _srho(f, tr, 0, cfg.b, {})


def _srho(f, tr, k, b, memo):
    key = (id(f), k)
    got = memo.get(key)
    if got is not None:
        return got
    if isinstance(f, Pred):
        v = f.h.eval(tr.states[k])
    elif isinstance(f, And):
        v = softmin([_srho(c, tr, k, b, memo) for c in f.children], b)
    elif isinstance(f, Or):
        v = softmax_lb([_srho(c, tr, k, b, memo) for c in f.children], b)
    elif isinstance(f, Always):
        v = softmin([_srho(f.child, tr, kk, b, memo)
                     for kk in range(k + f.a, k + f.b + 1)], b)
    elif isinstance(f, Eventually):
        v = softmax_lb([_srho(f.child, tr, kk, b, memo)
                        for kk in range(k + f.a, k + f.b + 1)], b)
    elif isinstance(f, Until):
        outer = []
        for kp in range(k + f.a, k + f.b + 1):
            inner = [_srho(f.left, tr, kpp, b, memo) for kpp in range(k, kp)]
            inner.append(_srho(f.right, tr, kp, b, memo))
            outer.append(softmin(inner, b))
        v = softmax_lb(outer, b)
    elif isinstance(f, Release):
        outer = []
        for kp in range(k + f.a, k + f.b + 1):
            inner = [_srho(f.left, tr, kpp, b, memo) for kpp in range(k, kp)]
            inner.append(_srho(f.right, tr, kp, b, memo))
            outer.append(softmax_lb(inner, b))
        v = softmin(outer, b)
    else:
        raise TypeError(f"not a formula node: {f!r}")
    memo[key] = v
    return v
