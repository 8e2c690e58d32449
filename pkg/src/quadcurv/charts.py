"""Coordinate charts for the building-block metrics.

Every chart evaluates metric components on a domain in R^4.  The closed-form
charts are written in a common radial form

    g(x) = f0(q) delta + f1(q) x x^T + f2(q) w w^T,        q = |x|^2,

(or the per-factor analogue for the product metric), where w = I x is the
image of x under the standard complex structure

    I (x1, x2, x3, x4) = (-x2, x1, -x4, x3).

The circle action generated by I is the simultaneous-phase rotation; the
2-plane rotations commuting with I, the factor swap (x1,x2) <-> (x3,x4),
and the per-factor rotations supply the symmetry tags checked by
``MetricChart.verify_symmetries``.

Radial coefficient functions are evaluated from closed forms away from the
origin and from even power series inside q < SERIES_CUT, so the charts are
smooth across the center and stable under finite differencing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .tensor_core import MODEL_CURVATURES

GUARD = 1e-6          # refuse evaluation this close to a coordinate singularity
SERIES_CUT = 1e-2     # q below this switches the radial functions to series

# standard complex structure (simultaneous-phase generator)
CPLX = np.array([
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
])

# right quaternion multiplications, commuting with CPLX; together with the
# phase CPLX they span the isometry algebra u(2) of the center-fixing action
_JR = np.array([
    [0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
])
_KR = np.array([
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
])
SWAP = np.array([
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
])


class ChartDomainError(ValueError):
    """Point outside a chart's validity domain."""


# ---------------------------------------------------------------------------
# radial coefficient functions (value and q-derivative, series-stabilized)
# ---------------------------------------------------------------------------

def _series(q, coeffs):
    out = np.zeros_like(q)
    for c in reversed(coeffs):
        out = out * q + c
    return out


_A_SER = [1.0, -1 / 3, 2 / 45, -1 / 315, 2 / 14175, -2 / 467775]
_DA_SER = [-1 / 3, 4 / 45, -1 / 105, 8 / 14175, -2 / 93555]
_B_SER = [1 / 3, -2 / 45, 1 / 315, -2 / 14175, 2 / 467775]
_DB_SER = [-2 / 45, 2 / 315, -2 / 4725, 8 / 467775]
_C_SER = [-1.0, 2 / 3, -1 / 5, 34 / 945, -62 / 14175]
_DC_SER = [2 / 3, -2 / 5, 34 / 315, -248 / 14175]


def _safe(q):
    return np.where(q < SERIES_CUT, 1.0, q)


def rad_a(q):
    """sin^2(sqrt q) / q, smooth and equal to 1 at q = 0."""
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    x = np.sqrt(qs)
    return np.where(q < SERIES_CUT, _series(q, _A_SER), np.sin(x) ** 2 / qs)


def rad_da(q):
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    x = np.sqrt(qs)
    s, c = np.sin(x), np.cos(x)
    closed = (x * s * c - s * s) / qs ** 2
    return np.where(q < SERIES_CUT, _series(q, _DA_SER), closed)


def rad_b(q):
    """(q - sin^2(sqrt q)) / q^2, equal to 1/3 at q = 0."""
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    s = np.sin(np.sqrt(qs))
    return np.where(q < SERIES_CUT, _series(q, _B_SER), (qs - s * s) / qs ** 2)


def rad_db(q):
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    x = np.sqrt(qs)
    s, c = np.sin(x), np.cos(x)
    closed = (2 * s * s - qs - x * s * c) / qs ** 3
    return np.where(q < SERIES_CUT, _series(q, _DB_SER), closed)


def rad_c(q):
    """-sin^4(sqrt q) / q^2, equal to -1 at q = 0."""
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    s = np.sin(np.sqrt(qs))
    return np.where(q < SERIES_CUT, _series(q, _C_SER), -(s ** 4) / qs ** 2)


def rad_dc(q):
    q = np.asarray(q, dtype=float)
    qs = _safe(q)
    x = np.sqrt(qs)
    s, c = np.sin(x), np.cos(x)
    closed = (2 * s ** 4 - 2 * x * s ** 3 * c) / qs ** 3
    return np.where(q < SERIES_CUT, _series(q, _DC_SER), closed)


# ---------------------------------------------------------------------------
# chart container
# ---------------------------------------------------------------------------

@dataclass
class MetricChart:
    """A coordinate-domain description of a metric.

    ``components`` maps points of shape (..., 4) to metrics (..., 4, 4).
    ``partials1``, when present, returns exact first derivatives with layout
    (..., k, i, j) = d_k g_ij.  ``scale_hint`` is the natural length scale
    for finite-difference stencils around a point.
    """

    name: str
    components: Callable[[np.ndarray], np.ndarray]
    contains: Callable[[np.ndarray], np.ndarray]
    boundary_margin: Callable[[np.ndarray], np.ndarray]
    coord_style: str = "normal"
    partials1: Optional[Callable[[np.ndarray], np.ndarray]] = None
    scale_hint: Callable[[np.ndarray], float] = field(default=lambda x: 0.1)
    symmetries: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.contains(x)):
            raise ChartDomainError(f"point outside domain of chart '{self.name}'")
        return self.components(x)

    def eval_unchecked(self, x):
        return self.components(np.asarray(x, dtype=float))

    def verify_symmetries(self, n_points=100, seed=0, tol=1e-10):
        """Check g(Mx) pulled back equals g(x) at random sample points.

        Returns {element name: max deviation}; raises if any tag fails.
        """
        rng = np.random.default_rng(seed)
        pts = self.sample_points(n_points, rng)
        g = self.components(pts)
        report = {}
        for name, M in self.symmetries:
            mapped = pts @ M.T
            ok = self.contains(mapped)
            gm = self.components(mapped[ok])
            pulled = np.einsum("mi,...mn,nj->...ij", M, gm, M)
            dev = float(np.max(np.abs(pulled - g[ok]))) if ok.any() else 0.0
            report[name] = dev
            if dev > tol:
                raise AssertionError(
                    f"chart '{self.name}' breaks symmetry '{name}': {dev:.3e}")
        return report

    def sample_points(self, n, rng):
        raw = rng.standard_normal((4 * n, 4))
        if "sample_radius" in self.params:
            lo, hi = self.params["sample_radius"]
            radii = rng.uniform(lo, hi, size=4 * n)
            raw = raw / np.linalg.norm(raw, axis=1, keepdims=True) * radii[:, None]
        pts = raw[self.contains(raw)]
        if len(pts) < n:
            raise RuntimeError(f"could not sample chart '{self.name}'")
        return pts[:n]

    def min_eigenvalue(self, pts):
        g = self.components(np.asarray(pts, dtype=float))
        return float(np.linalg.eigvalsh(g).min())


@dataclass
class ChartPoint:
    coords: np.ndarray
    chart_id: str


def _torus(theta1, theta2):
    c1, s1 = np.cos(theta1), np.sin(theta1)
    c2, s2 = np.cos(theta2), np.sin(theta2)
    return np.array([
        [c1, -s1, 0, 0], [s1, c1, 0, 0],
        [0, 0, c2, -s2], [0, 0, s2, c2],
    ])


def _expm_skew(M, t):
    from scipy.linalg import expm
    return expm(t * M)


def u2_symmetry_elements():
    """Torus rotations, two transverse U(2) rotations, and the diagonal swap."""
    els = [
        ("torus(0.7, 0.0)", _torus(0.7, 0.0)),
        ("torus(0.0, 1.1)", _torus(0.0, 1.1)),
        ("torus(0.4, -0.9)", _torus(0.4, -0.9)),
        ("phase(0.5)", _expm_skew(CPLX, 0.5)),
        ("jrot(0.6)", _expm_skew(_JR, 0.6)),
        ("jrot(-1.2)", _expm_skew(_JR, -1.2)),
        ("krot(0.8)", _expm_skew(_KR, 0.8)),
        ("swap", SWAP),
    ]
    return els


def toric_symmetry_elements():
    refl1 = np.diag([1.0, -1.0, 1.0, 1.0])
    refl2 = np.diag([1.0, 1.0, 1.0, -1.0])
    return [
        ("torus(0.7, 0.0)", _torus(0.7, 0.0)),
        ("torus(0.0, 1.1)", _torus(0.0, 1.1)),
        ("torus(0.4, -0.9)", _torus(0.4, -0.9)),
        ("torus(2.0, 2.0)", _torus(2.0, 2.0)),
        ("reflect1", refl1),
        ("reflect2", refl2),
        ("swap", SWAP),
        ("swap*torus", SWAP @ _torus(0.3, 0.3)),
    ]


# ---------------------------------------------------------------------------
# the model charts
# ---------------------------------------------------------------------------

def flat_chart(name="flat"):
    def comps(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[...] = np.eye(4)
        return out

    def dcomps(x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (4, 4, 4))

    return MetricChart(
        name=name, components=comps,
        contains=lambda x: np.ones(np.asarray(x).shape[:-1], dtype=bool),
        boundary_margin=lambda x: np.full(np.asarray(x).shape[:-1], np.inf),
        partials1=dcomps, coord_style="normal",
        scale_hint=lambda x: 1.0,
        symmetries=u2_symmetry_elements() + toric_symmetry_elements(),
        params={"chart": "flat", "sample_radius": (0.0, 2.0)},
    )


def _radial_components(x, f0, f1, f2):
    """g = f0(q) delta + f1(q) x x^T + f2(q) (Ix)(Ix)^T."""
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)
    w = x @ CPLX.T
    g = np.multiply.outer(f0(q), np.eye(4))
    g = g + f1(q)[..., None, None] * (x[..., :, None] * x[..., None, :])
    g = g + f2(q)[..., None, None] * (w[..., :, None] * w[..., None, :])
    return g


def _radial_partials(x, f0, f1, f2, df0, df1, df2):
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)
    w = x @ CPLX.T
    xx = x[..., :, None] * x[..., None, :]
    ww = w[..., :, None] * w[..., None, :]
    radial = df1(q)[..., None, None] * xx
    radial += df2(q)[..., None, None] * ww
    d0 = df0(q)
    for i in range(4):
        radial[..., i, i] += d0
    out = np.einsum("...k,...ij->...kij", 2.0 * x, radial)
    # d_k (x_i x_j) = delta_ik x_j + delta_jk x_i
    xb = f1(q)[..., None] * x
    for k in range(4):
        out[..., k, k, :] += xb
        out[..., k, :, k] += xb
    # d_k (w_i w_j) = I_ik w_j + I_jk w_i, with I the complex structure
    wb = f2(q)[..., None] * w
    for k in range(4):
        (i,) = np.nonzero(CPLX[:, k])[0]
        s = CPLX[i, k]
        out[..., k, i, :] += s * wb
        out[..., k, :, i] += s * wb
    return out


def fubini_study(style="polar", name=None):
    """The Fubini-Study metric normalized to Ric = 6 g.

    style='polar': exact components of d rho^2 + sin^2(rho)(s1^2 + s2^2 +
    cos^2(rho) s3^2) realized in Cartesian normal coordinates on the ball
    rho < pi/2.  style='normal': the quadratic expansion chart
    delta - (1/3) Rm[i,k,j,l] z^k z^l with the exact curvature at the center.
    """
    if style == "normal":
        return expansion_chart(MODEL_CURVATURES["fs"](), name=name or "fs_normal",
                               rmax=0.5, symmetries=u2_symmetry_elements(),
                               config={"chart": "fs", "style": "normal"})
    if style != "polar":
        raise ValueError(f"unknown style {style!r}")
    rmax = np.pi / 2 - GUARD

    def f0(q):
        return rad_a(q)

    def f1(q):
        return rad_b(q)

    def f2(q):
        return rad_c(q)

    def comps(x):
        return _radial_components(x, f0, f1, f2)

    def dcomps(x):
        return _radial_partials(x, f0, f1, f2, rad_da, rad_db, rad_dc)

    def contains(x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) < rmax ** 2

    def margin(x):
        x = np.asarray(x, dtype=float)
        return rmax - np.sqrt(np.sum(x * x, axis=-1))

    return MetricChart(
        name=name or "fs", components=comps, contains=contains,
        boundary_margin=margin, coord_style="polar", partials1=dcomps,
        scale_hint=lambda x: 0.4,
        symmetries=u2_symmetry_elements(),
        params={"chart": "fs", "style": "polar", "sample_radius": (0.0, 1.3)},
    )


def s2xs2(style="polar", name=None):
    """Product of two unit-curvature round 2-spheres (R = 4).

    style='polar': exact per-factor components on {r1 < pi, r2 < pi} in
    Cartesian normal coordinates (z1, z2 | z3, z4).  style='normal': the
    quadratic expansion chart with the exact curvature at (n, n).
    """
    if style == "normal":
        return expansion_chart(MODEL_CURVATURES["s2xs2"](), name=name or "s2xs2_normal",
                               rmax=0.5, symmetries=toric_symmetry_elements(),
                               config={"chart": "s2xs2", "style": "normal"})
    if style != "polar":
        raise ValueError(f"unknown style {style!r}")
    rmax = np.pi - GUARD

    def comps(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4))
        for sl in (slice(0, 2), slice(2, 4)):
            v = x[..., sl]
            p = np.sum(v * v, axis=-1)
            blk = np.multiply.outer(rad_a(p), np.eye(2))
            blk = blk + rad_b(p)[..., None, None] * (v[..., :, None] * v[..., None, :])
            out[..., sl, sl] = blk
        return out

    def dcomps(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (4, 4, 4))
        eye2 = np.eye(2)
        for k0, sl in ((0, slice(0, 2)), (2, slice(2, 4))):
            v = x[..., sl]
            p = np.sum(v * v, axis=-1)
            vv = v[..., :, None] * v[..., None, :]
            eye = np.broadcast_to(eye2, v.shape[:-1] + (2, 2))
            radial = (rad_da(p)[..., None, None] * eye
                      + rad_db(p)[..., None, None] * vv)
            blk = 2.0 * v[..., :, None, None] * radial[..., None, :, :]
            blk = blk + rad_b(p)[..., None, None, None] * (
                eye2.T[:, :, None] * v[..., None, None, :]
                + eye2.T[:, None, :] * v[..., None, :, None])
            out[..., sl, sl, sl] = blk
        return out

    def contains(x):
        x = np.asarray(x, dtype=float)
        p1 = np.sum(x[..., :2] ** 2, axis=-1)
        p2 = np.sum(x[..., 2:] ** 2, axis=-1)
        return (p1 < rmax ** 2) & (p2 < rmax ** 2)

    def margin(x):
        x = np.asarray(x, dtype=float)
        p1 = np.sqrt(np.sum(x[..., :2] ** 2, axis=-1))
        p2 = np.sqrt(np.sum(x[..., 2:] ** 2, axis=-1))
        return rmax - np.maximum(p1, p2)

    return MetricChart(
        name=name or "s2xs2", components=comps, contains=contains,
        boundary_margin=margin, coord_style="polar", partials1=dcomps,
        scale_hint=lambda x: 0.4,
        symmetries=toric_symmetry_elements(),
        params={"chart": "s2xs2", "style": "polar", "sample_radius": (0.0, 1.5)},
    )


def expansion_chart(Rm0, name="expansion", rmax=0.5, symmetries=None, config=None,
                    A=None):
    """Generic normal-coordinate expansion chart.

    With A=None: g = delta - (1/3) Rm0[i,k,j,l] z^k z^l   (quadratic model).
    With A given: the inverse-quadratic AF model
    g = delta - (1/3) Rm0[i,k,j,l] x^k x^l / |x|^4 + 2A delta / |x|^2
    on |x| > rmax (rmax then acts as an inner radius).
    """
    Rm0 = np.asarray(Rm0, dtype=float)
    af = A is not None

    def comps(x):
        x = np.asarray(x, dtype=float)
        quad = np.einsum("ikjl,...k,...l->...ij", Rm0, x, x)
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[...] = np.eye(4)
        if af:
            q = np.sum(x * x, axis=-1)[..., None, None]
            out = out - quad / (3.0 * q * q)
            out = out + (2.0 * A / q) * np.eye(4)
        else:
            out = out - quad / 3.0
        return out

    def dcomps(x):
        x = np.asarray(x, dtype=float)
        if af:
            raise NotImplementedError("AF expansion chart has no analytic partials")
        d = -(np.einsum("ikjl,...l->...kij", Rm0, x)
              + np.einsum("iljk,...l->...kij", Rm0, x)) / 3.0
        return d

    if af:
        def contains(x):
            x = np.asarray(x, dtype=float)
            return np.sum(x * x, axis=-1) > rmax ** 2

        def margin(x):
            x = np.asarray(x, dtype=float)
            return np.sqrt(np.sum(x * x, axis=-1)) - rmax
        params = dict(config or {"chart": "af_expansion"})
        params.setdefault("sample_radius", (2 * rmax, 20 * rmax))
        return MetricChart(
            name=name, components=comps, contains=contains, boundary_margin=margin,
            coord_style="inverted", scale_hint=_af_scale, symmetries=symmetries or [],
            params=params)

    def contains(x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) < rmax ** 2

    def margin(x):
        x = np.asarray(x, dtype=float)
        return rmax - np.sqrt(np.sum(x * x, axis=-1))
    params = dict(config or {"chart": "expansion"})
    params.setdefault("sample_radius", (0.0, 0.9 * rmax))
    return MetricChart(
        name=name, components=comps, contains=contains, boundary_margin=margin,
        coord_style="normal", partials1=dcomps,
        scale_hint=lambda x: 0.05 * rmax, symmetries=symmetries or [],
        params=params)


def _af_scale(x):
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    return 0.08 * float(np.min(r))


def burns_metric(style="inverted", name=None):
    """The scalar-flat conformal blow-up of the Fubini-Study metric (mass 2).

    style='inverted' (default): components in inverted normal coordinates
    x = z/|z|^2 on |x| > 2/pi, where the AF expansion reads
    delta - (1/3) Rm_FS[i,k,j,l] x^k x^l / |x|^4 + (2/3) delta / |x|^2 + O(|x|^-4).
    style='classic': the closed radial form dr^2/(1 - r^-2) +
    r^2 [s1^2 + s2^2 + (1 - r^-2) s3^2] at radial coordinate r = 1/sin(rho),
    valid for r > 1.
    """
    if style == "classic":
        rmin = 1.0 + GUARD

        def f0(q):
            return np.ones_like(np.asarray(q, dtype=float))

        def f1(q):
            q = np.asarray(q, dtype=float)
            return 1.0 / (q * (q - 1.0))

        def f2(q):
            q = np.asarray(q, dtype=float)
            return -1.0 / q ** 2

        def df0(q):
            return np.zeros_like(np.asarray(q, dtype=float))

        def df1(q):
            q = np.asarray(q, dtype=float)
            return -(2.0 * q - 1.0) / (q * (q - 1.0)) ** 2

        def df2(q):
            q = np.asarray(q, dtype=float)
            return 2.0 / q ** 3

        def comps(x):
            return _radial_components(x, f0, f1, f2)

        def dcomps(x):
            return _radial_partials(x, f0, f1, f2, df0, df1, df2)

        def contains(x):
            x = np.asarray(x, dtype=float)
            return np.sum(x * x, axis=-1) > rmin ** 2

        def margin(x):
            x = np.asarray(x, dtype=float)
            return np.sqrt(np.sum(x * x, axis=-1)) - rmin

        return MetricChart(
            name=name or "burns_classic", components=comps, contains=contains,
            boundary_margin=margin, coord_style="polar", partials1=dcomps,
            scale_hint=_af_scale, symmetries=u2_symmetry_elements(),
            params={"chart": "burns", "style": "classic", "sample_radius": (2.0, 40.0)})

    if style != "inverted":
        raise ValueError(f"unknown style {style!r}")
    xmin = 2.0 / np.pi + GUARD

    # g = alpha(p) delta + beta(p) x x^T + gamma(p) (Ix)(Ix)^T with p = 1/|x|^2:
    # alpha = 1/a(p), beta = p^2 b(p)/a(p)^2, gamma = -p^2, the conformal factor
    # G = 1/sin^2(rho) absorbed exactly.
    def comps(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        p = 1.0 / q

        def f0(_):
            return 1.0 / rad_a(p)

        def f1(_):
            return p * p * rad_b(p) / rad_a(p) ** 2

        def f2(_):
            return -p * p
        return _radial_components(x, f0, f1, f2)

    def dcomps(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        p = 1.0 / q
        dp = -p * p  # dp/dq
        a, b = rad_a(p), rad_b(p)
        da, db = rad_da(p), rad_db(p)

        def f0(_):
            return 1.0 / a

        def f1(_):
            return p * p * b / a ** 2

        def f2(_):
            return -p * p

        def df0(_):
            return (-da / a ** 2) * dp

        def df1(_):
            return (2 * p * b / a ** 2 + p * p * db / a ** 2
                    - 2 * p * p * b * da / a ** 3) * dp

        def df2(_):
            return -2 * p * dp
        return _radial_partials(x, f0, f1, f2, df0, df1, df2)

    def contains(x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) > xmin ** 2

    def margin(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(x * x, axis=-1)) - xmin

    return MetricChart(
        name=name or "burns", components=comps, contains=contains,
        boundary_margin=margin, coord_style="inverted", partials1=dcomps,
        scale_hint=_af_scale, symmetries=u2_symmetry_elements(),
        params={"chart": "burns", "style": "inverted", "sample_radius": (1.5, 40.0)})


# ---------------------------------------------------------------------------
# conformal blow-up
# ---------------------------------------------------------------------------

def invert_points(x):
    x = np.asarray(x, dtype=float)
    return x / np.sum(x * x, axis=-1)[..., None]


def inversion_jacobian(x):
    """J_mn = d z_m / d x_n for z = x / |x|^2."""
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)[..., None, None]
    xhat2 = (x[..., :, None] * x[..., None, :]) / q
    return (np.eye(4) - 2.0 * xhat2) / q


def conformal_blowup(base: MetricChart, greens_fn, name=None, inner_radius=None,
                     symmetries=None):
    """Blow up (base, g) to the AF metric G^2 g in inverted coordinates.

    ``greens_fn`` maps base-chart points (..., 4) to Green's function values;
    it must be positive on the punctured base domain.  The chart is valid for
    |x| > inner_radius (default: the reciprocal of a safe base radius).
    """
    if inner_radius is None:
        probe = 1.0
        inner_radius = 1.0 / probe

    def comps(x):
        x = np.asarray(x, dtype=float)
        z = invert_points(x)
        J = inversion_jacobian(x)
        gb = base.components(z)
        G = np.asarray(greens_fn(z), dtype=float)
        if np.any(G <= 0):
            raise ValueError("Green's function evaluator returned a nonpositive value")
        return (G ** 2)[..., None, None] * np.einsum(
            "...mi,...mn,...nj->...ij", J, gb, J)

    def contains(x):
        x = np.asarray(x, dtype=float)
        q = np.sum(x * x, axis=-1)
        ok = q > inner_radius ** 2
        return ok & base.contains(invert_points(np.where(ok[..., None], x, 2 * inner_radius)))

    def margin(x):
        x = np.asarray(x, dtype=float)
        return np.sqrt(np.sum(x * x, axis=-1)) - inner_radius

    return MetricChart(
        name=name or f"blowup({base.name})", components=comps, contains=contains,
        boundary_margin=margin, coord_style="inverted",
        scale_hint=_af_scale, symmetries=symmetries if symmetries is not None else [],
        params={"chart": "blowup", "base": base.params.get("chart", base.name),
                "sample_radius": (2 * inner_radius, 40.0)})


def fs_greens_evaluator(z):
    """Exact Green's function of the Fubini-Study conformal Laplacian: 1/sin^2 rho."""
    z = np.asarray(z, dtype=float)
    q = np.sum(z * z, axis=-1)
    return 1.0 / (q * rad_a(q))


# ---------------------------------------------------------------------------
# plain-text chart configs
# ---------------------------------------------------------------------------

def chart_to_config(chart: MetricChart):
    lines = []
    for key, val in chart.params.items():
        if key == "sample_radius":
            continue
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def parse_config_text(text):
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def chart_from_config(cfg):
    """Build a chart from a parsed key-value config (or config text)."""
    if isinstance(cfg, str):
        cfg = parse_config_text(cfg)
    kind = cfg.get("chart")
    style = cfg.get("style")
    if kind == "flat":
        return flat_chart()
    if kind == "fs":
        return fubini_study(style or "polar")
    if kind == "s2xs2":
        return s2xs2(style or "polar")
    if kind == "burns":
        return burns_metric(style or "inverted")
    if kind == "blowup":
        base = cfg.get("base", "fs")
        if base == "fs":
            return conformal_blowup(fubini_study("polar"), fs_greens_evaluator,
                                    name="blowup(fs)", inner_radius=2.0 / np.pi + GUARD,
                                    symmetries=u2_symmetry_elements())
        raise ValueError(
            f"blowup base {base!r} needs a Green's function cache; build it via "
            "quadcurv.greens.blowup_chart")
    raise ValueError(f"unknown chart kind {kind!r}")
