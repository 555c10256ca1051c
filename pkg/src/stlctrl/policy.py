"""Feedforward tanh controller a_k = pi_theta(s_k, k) and the Adam update.

Parameters are a flat list theta; layer i occupies weights (row-major,
out x in) followed by biases.  The time-step k is appended to the state
as an extra input coordinate unless include_time is off.
"""

import json
import math

from .autodiff import tanh


def param_count(widths):
    return sum(widths[i + 1] * (widths[i] + 1) for i in range(len(widths) - 1))


class Policy:
    """MLP with tanh hidden layers and identity output."""

    def __init__(self, widths, theta=None, include_time=True, time_scale=1.0):
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"bad layer widths {widths}")
        self.widths = list(widths)
        self.include_time = include_time
        self.time_scale = float(time_scale)
        n = param_count(widths)
        if theta is None:
            theta = [0.0] * n
        if len(theta) != n:
            raise ValueError(f"theta length {len(theta)} != {n} for widths {widths}")
        self.theta = list(theta)

    @property
    def state_dim(self):
        return self.widths[0] - (1 if self.include_time else 0)

    @property
    def action_dim(self):
        return self.widths[-1]

    def forward(self, s, k, theta=None):
        """Raw action vector; generic over floats and tape Vars."""
        th = self.theta if theta is None else theta
        x = list(s)
        if self.include_time:
            x.append(float(k) * self.time_scale)
        if len(x) != self.widths[0]:
            raise ValueError(
                f"input dim {len(x)} != widths[0]={self.widths[0]}")
        off = 0
        last = len(self.widths) - 2
        for li in range(len(self.widths) - 1):
            nin = self.widths[li]
            nout = self.widths[li + 1]
            bias_off = off + nout * nin
            out = []
            for j in range(nout):
                row = off + j * nin
                acc = th[bias_off + j]
                for i in range(nin):
                    acc = acc + th[row + i] * x[i]
                out.append(acc if li == last else tanh(acc))
            x = out
            off = bias_off + nout
        return x

    def with_theta(self, theta):
        return Policy(self.widths, theta, self.include_time, self.time_scale)

    # -- persistence ----------------------------------------------------------

    def save(self, path, plant_name=None, metadata=None):
        doc = {
            "widths": self.widths,
            "theta": self.theta,
            "activation": "tanh",
            "include_time": self.include_time,
            "time_scale": self.time_scale,
            "plant": plant_name,
            "metadata": metadata or {},
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("activation", "tanh") != "tanh":
            raise ValueError(f"unsupported activation {doc['activation']!r}")
        return cls(doc["widths"], doc["theta"],
                   doc.get("include_time", True), doc.get("time_scale", 1.0))


def init(widths, scheme="xavier", rng=None, include_time=True, time_scale=1.0):
    """Fresh policy; xavier scheme is uniform +-sqrt(6/(nin+nout)) per layer."""
    theta = []
    for li in range(len(widths) - 1):
        nin, nout = widths[li], widths[li + 1]
        if scheme == "xavier":
            lim = math.sqrt(6.0 / (nin + nout))
            theta.extend(rng.uniform(-lim, lim) for _ in range(nout * nin))
        elif scheme == "zero":
            theta.extend([0.0] * (nout * nin))
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        theta.extend([0.0] * nout)
    return Policy(widths, theta, include_time, time_scale)


class AdamState:
    def __init__(self, n, alpha=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [0.0] * n
        self.v = [0.0] * n
        self.t = 0
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_update(st, theta, g):
    """One ascent step theta <- theta + Adam(g); mutates st, returns new theta."""
    if len(theta) != len(st.m) or len(g) != len(st.m):
        raise ValueError("parameter/gradient length mismatch")
    for gi in g:
        if not math.isfinite(gi):
            raise ValueError(f"non-finite gradient component {gi}")
    st.t += 1
    b1t = 1.0 - st.beta1 ** st.t
    b2t = 1.0 - st.beta2 ** st.t
    out = list(theta)
    for i, gi in enumerate(g):
        st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * gi
        st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * gi * gi
        mhat = st.m[i] / b1t
        vhat = st.v[i] / b2t
        out[i] = theta[i] + st.alpha * mhat / (math.sqrt(vhat) + st.eps)
    return out
