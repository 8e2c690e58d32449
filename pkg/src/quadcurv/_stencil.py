"""Finite-difference jets of chart components.

Derivatives of metric components are extracted with tensor-product central
stencils: the component function is evaluated once on a full lattice
p + h * n, n in {-r..r}^4, and every partial derivative up to the requested
order is obtained by contracting the lattice values with per-axis Fornberg
weights.  Two step sizes (h, h/2) feed a Richardson extrapolation whose
update size doubles as the truncation-error estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def fornberg_weights(m, nodes):
    """Weights of the m-th derivative at 0 on the given 1-d nodes."""
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if m >= n:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, nodes[0]
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, nodes[i]
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def stencil_accuracy(m, npoints):
    """Accuracy order of the symmetric central stencil (even by parity)."""
    p = npoints - m
    return p if p % 2 == 0 else p + 1


@dataclass
class FDScheme:
    """Central-difference scheme: node count, relative step, Richardson levels."""

    nodes: int = 9
    rel_step: float = float(np.finfo(float).eps ** 0.1)
    richardson: int = 2

    def radius(self):
        return self.nodes // 2

    def span(self, h):
        # worst-case lattice excursion (corner of the cube at the base step)
        return self.radius() * h * 2.0


class InsufficientMarginError(ValueError):
    """Stencil would leave the chart domain."""


def _multi_indices(max_order):
    out = []
    for total in range(max_order + 1):
        def rec(prefix, rem, k):
            if k == 3:
                out.append(tuple(prefix + [rem]))
                return
            for v in range(rem + 1):
                rec(prefix + [v], rem - v, k + 1)
        rec([], total, 0)
    return out


def lattice_jet(func, p, max_order, h, nodes=9):
    """All partials of ``func`` at p up to ``max_order`` from one lattice pass.

    Returns {multi_index: array}, each array shaped like func's output.
    """
    r = nodes // 2
    offs = np.arange(-r, r + 1, dtype=float)
    grid = np.stack(np.meshgrid(offs, offs, offs, offs, indexing="ij"), axis=-1)
    pts = np.asarray(p, dtype=float) + h * grid
    vals = np.asarray(func(pts.reshape(-1, 4)))
    vals = vals.reshape((nodes,) * 4 + vals.shape[1:])
    weights = {m: fornberg_weights(m, offs) for m in range(max_order + 1)}
    flat = vals.reshape(nodes ** 4, -1)
    jet = {}
    for alpha in _multi_indices(max_order):
        w = [weights[m] for m in alpha]
        w4 = np.einsum("a,b,c,d->abcd", *w).reshape(-1)
        arr = (w4 @ flat).reshape(vals.shape[4:])
        jet[alpha] = arr / h ** sum(alpha)
    return jet


def _axis_orders(alpha, nodes):
    return min(stencil_accuracy(m, nodes) for m in alpha if m > 0)


def jet_with_richardson(func, p, max_order, h, nodes=9, levels=2):
    """Richardson-extrapolated lattice jet plus a truncation-error estimate.

    Returns (jet dict, error dict); with levels == 1 the raw jet is returned
    and the error entries are NaN.
    """
    jets = [lattice_jet(func, p, max_order, h / 2 ** k, nodes) for k in range(levels)]
    out, err = {}, {}
    for alpha in jets[0]:
        if sum(alpha) == 0 or levels == 1:
            out[alpha] = jets[-1][alpha]
            err[alpha] = 0.0 if sum(alpha) == 0 else float("nan")
            continue
        pord = _axis_orders(alpha, nodes)
        best = jets[0][alpha]
        for k in range(1, levels):
            fac = 2.0 ** pord
            update = (fac * jets[k][alpha] - best) / (fac - 1.0)
            err[alpha] = float(np.max(np.abs(update - jets[k][alpha])))
            best = update
        out[alpha] = best
    return out, err


def jet_to_arrays(jet, max_order, shape):
    """Repack {multi_index: array} into dense arrays D[k], k = 0..max_order.

    D[k] has layout (a_1, ..., a_k, *shape) symmetrized over the derivative
    axes (the jet is symmetric by construction).
    """
    arrays = []
    for order in range(max_order + 1):
        D = np.zeros((4,) * order + tuple(shape))
        for axes in np.ndindex(*(4,) * order):
            alpha = [0, 0, 0, 0]
            for a in axes:
                alpha[a] += 1
            D[axes] = jet[tuple(alpha)]
        arrays.append(D)
    return arrays


def _lattice_jet_batch(func, pts, max_order, h, nodes=9):
    """Lattice jets for a batch of points with per-point steps h (N,)."""
    r = nodes // 2
    offs = np.arange(-r, r + 1, dtype=float)
    grid = np.stack(np.meshgrid(offs, offs, offs, offs, indexing="ij"), axis=-1)
    lat = grid.reshape(-1, 4)  # (L, 4)
    pts = np.asarray(pts, dtype=float)
    h = np.asarray(h, dtype=float)
    cloud = pts[:, None, :] + h[:, None, None] * lat[None, :, :]
    vals = np.asarray(func(cloud.reshape(-1, 4)))
    out_shape = vals.shape[1:]
    vals = vals.reshape((len(pts), nodes, nodes, nodes, nodes) + out_shape)
    weights = {m: fornberg_weights(m, offs) for m in range(max_order + 1)}
    flat = np.moveaxis(vals.reshape((len(pts), nodes ** 4) + out_shape), 1, -1)
    flat = np.ascontiguousarray(flat)  # (n, *out, L)
    jet = {}
    for alpha in _multi_indices(max_order):
        w = [weights[m] for m in alpha]
        w4 = np.einsum("a,b,c,d->abcd", *w).reshape(-1)
        arr = flat @ w4  # (n, *out)
        scale = h ** sum(alpha)
        jet[alpha] = arr / scale.reshape((len(pts),) + (1,) * (arr.ndim - 1))
    return jet


def _jet_batch_richardson(func, pts, max_order, h, nodes=9, levels=2):
    jets = [_lattice_jet_batch(func, pts, max_order, h / 2 ** k, nodes)
            for k in range(levels)]
    out, err = {}, {}
    for alpha in jets[0]:
        if sum(alpha) == 0 or levels == 1:
            out[alpha] = jets[-1][alpha]
            err[alpha] = 0.0 if sum(alpha) == 0 else float("nan")
            continue
        pord = _axis_orders(alpha, nodes)
        best = jets[0][alpha]
        for k in range(1, levels):
            fac = 2.0 ** pord
            update = (fac * jets[k][alpha] - best) / (fac - 1.0)
            err[alpha] = float(np.max(np.abs(update - jets[k][alpha])))
            best = update
        out[alpha] = best
    return out, err


def derivative_arrays_batch(chart, pts, max_order, scheme: FDScheme = None):
    """Batched version of ``derivative_arrays``: D[k] has layout
    (n, a_1..a_k, i, j)."""
    scheme = scheme or FDScheme()
    pts = np.asarray(pts, dtype=float)
    if not np.all(chart.contains(pts)):
        raise InsufficientMarginError(f"points outside chart '{chart.name}'")
    h = np.array([scheme.rel_step * float(chart.scale_hint(p)) for p in pts])
    margin = np.asarray(chart.boundary_margin(pts), dtype=float)
    need = scheme.radius() * 2.0 * 1.25
    tight = margin < need * h
    h = np.where(tight, np.maximum(margin / (2.0 * need), 1e-9), h)
    g0 = chart.components(pts)
    if chart.partials1 is not None:
        if max_order == 0:
            return [g0], 0.0
        jet, err = _jet_batch_richardson(chart.partials1, pts, max_order - 1, h,
                                         scheme.nodes, scheme.richardson)
        darrs = _jet_to_arrays_batch(jet, max_order - 1, (4, 4, 4), len(pts))
        arrays = [g0] + darrs
    else:
        jet, err = _jet_batch_richardson(chart.components, pts, max_order, h,
                                         scheme.nodes, scheme.richardson)
        arrays = _jet_to_arrays_batch(jet, max_order, (4, 4), len(pts))
        arrays[0] = g0
    trunc = max((v for v in err.values() if v == v), default=0.0)
    return arrays, trunc


def _jet_to_arrays_batch(jet, max_order, shape, n):
    arrays = []
    for order in range(max_order + 1):
        D = np.zeros((n,) + (4,) * order + tuple(shape))
        for axes in np.ndindex(*(4,) * order):
            alpha = [0, 0, 0, 0]
            for a in axes:
                alpha[a] += 1
            D[(slice(None),) + axes] = jet[tuple(alpha)]
        arrays.append(D)
    return arrays


def derivative_arrays(chart, p, max_order, scheme: FDScheme = None):
    """Partial-derivative arrays D0..Dmax of chart components at point p.

    Uses the chart's exact first derivatives when present (FD then only
    differentiates the analytic gradient, lowering the required FD order
    by one).  Returns (arrays, truncation_estimate).
    """
    scheme = scheme or FDScheme()
    p = np.asarray(p, dtype=float)
    if not np.all(chart.contains(p)):
        raise InsufficientMarginError(f"point outside chart '{chart.name}'")
    h = scheme.rel_step * float(chart.scale_hint(p))
    margin = float(np.min(chart.boundary_margin(p)))
    need = scheme.span(h) * 1.25
    if margin < need:
        h = h * margin / (2.0 * need)
        if h <= 0 or margin <= 0:
            raise InsufficientMarginError(
                f"chart '{chart.name}': margin {margin:.3e} too small for stencil")
    g0 = chart.components(p)
    if chart.partials1 is not None:
        if max_order == 0:
            return [g0], 0.0
        jet, err = jet_with_richardson(chart.partials1, p, max_order - 1, h,
                                       scheme.nodes, scheme.richardson)
        darrs = jet_to_arrays(jet, max_order - 1, (4, 4, 4))
        # D{k+1}[a1..ak, m, i, j] = d_{a1..ak} (d_m g_ij)
        arrays = [g0] + [np.asarray(d) for d in darrs]
    else:
        jet, err = jet_with_richardson(chart.components, p, max_order, h,
                                       scheme.nodes, scheme.richardson)
        arrays = jet_to_arrays(jet, max_order, (4, 4))
        arrays[0] = g0
    trunc = max((v for v in err.values() if v == v), default=0.0)
    return arrays, trunc
