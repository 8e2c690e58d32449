"""Shared fixtures: synthetic analytic metrics used as engine oracles."""

import numpy as np
import pytest

from quadcurv import charts as ch


def make_generic_chart(seed=42, amp=0.04):
    """Trig-perturbed flat metric with exact first derivatives.

    Non-Einstein and non-conformally-flat, so Bach and C are nontrivial.
    """
    rng = np.random.default_rng(seed)
    ks = rng.standard_normal((3, 4)) * 0.8
    cs = rng.uniform(0, 2 * np.pi, 3)
    Ss = [amp * (m + m.T) for m in rng.standard_normal((3, 4, 4))]

    def pert(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        for k, c, S in zip(ks, cs, Ss):
            out += np.sin(x @ k + c)[..., None, None] * S
        return out

    def dpert(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4, 4))
        for k, c, S in zip(ks, cs, Ss):
            out += np.cos(x @ k + c)[..., None, None, None] * np.multiply.outer(k, S)
        return out

    def comps(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[...] = np.eye(4)
        return out + pert(x)

    return ch.MetricChart(
        name="generic", components=comps,
        contains=lambda x: np.ones(np.asarray(x).shape[:-1], dtype=bool),
        boundary_margin=lambda x: np.full(np.asarray(x).shape[:-1], np.inf),
        partials1=dpert, scale_hint=lambda x: 0.5)


def bump_value(x, center, rho):
    x = np.asarray(x, dtype=float)
    s = np.sum((x - center) ** 2, axis=-1) / rho ** 2
    out = np.zeros_like(s)
    mask = s < 1.0
    out[mask] = np.exp(-1.0 / (1.0 - s[mask]))
    return out


def bump_gradient(x, center, rho):
    x = np.asarray(x, dtype=float)
    s = np.sum((x - center) ** 2, axis=-1) / rho ** 2
    f = np.zeros_like(s)
    mask = s < 1.0
    f[mask] = np.exp(-1.0 / (1.0 - s[mask])) * (-1.0 / (1.0 - s[mask]) ** 2)
    return f[..., None] * 2 * (x - center) / rho ** 2


def make_bumped_flat_chart(S0, S1, s, center=None, rho=0.8):
    """Flat metric plus bump * (S0 + s * S1), compactly supported."""
    center = np.zeros(4) if center is None else center

    def comps(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[...] = np.eye(4)
        return out + bump_value(x, center, rho)[..., None, None] * (S0 + s * S1)

    def partials1(x):
        return bump_gradient(x, center, rho)[..., :, None, None] * (S0 + s * S1)

    return ch.MetricChart(
        name="bumped_flat", components=comps,
        contains=lambda x: np.ones(np.asarray(x).shape[:-1], dtype=bool),
        boundary_margin=lambda x: np.full(np.asarray(x).shape[:-1], np.inf),
        partials1=partials1, scale_hint=lambda x: 0.4)


@pytest.fixture(scope="session")
def generic_chart():
    return make_generic_chart()
