"""Glued approximate metrics, decay scans, and critical parameter values.

The connected-sum construction identifies the annulus b <= |z| <= 2b around
the compact base point with the annulus 1/a <= |x| <= 2/a of the AF factor
through z = a b x, rescales the compact metric by (ab)^{-2}, and blends the
two metrics with a radial cutoff in the damage zone:

    g0(x) = delta + phi(a|x|) eta_N(x) + (1 - phi(a|x|)) eta_Z(a b x),

where eta = g - delta per factor.  The refined metric adds the leading
correction tensors with cutoffs,

    AF side:       a^2 b^2 (1 - phi(|x|/R0)) H2(x),
    compact side:  phi(|z|/Rc) H-2-part, which lands in the damage zone as
                   the exact inverse-quadratic tensor of the AF factor,

so the blended metric matches delta - a^2 b^2 (1/3) R(z0) x x
- (1/3) R(y0) x x / |x|^4 + 2 A delta / |x|^2 to leading order.

The critical parameter comes from the leading coefficient of the scaling
obstruction,

    lambda(t) = (2/3) (W(z0) (*) W(y0)) omega3 + 4 t omega3 R(z0) mass,
    t0 = - (W(z0) (*) W(y0)) / (6 R(z0) mass),

evaluated with exact rational Weyl models wherever the inputs are exact
(every row with a Burns bubble reduces to the rational -1/3).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import charts as ch
from . import tensor_core as tc
from . import curvature_engine as eng
from ._stencil import FDScheme

OMEGA3 = 2.0 * np.pi ** 2

SYMMETRY_BUBBLES = {"diagonal": 1, "bilateral": 2, "trilateral": 3, "quadrilateral": 4}

# compact factor data: scalar curvature at the base point, Weyl model,
# local chart builder (quotients are locally the product metric)
COMPACT_FACTORS = {
    "fs": {"R": 24, "weyl": lambda exact: tc.weyl_from_eigenvalues(
        (4, -2, -2), (0, 0, 0), exact=exact),
        "curvature": tc.fs_curvature,
        "chart": lambda: ch.fubini_study("polar"),
        "zmax": 1.2, "symmetries": "u2",
        "allowed_symmetries": ("diagonal", "trilateral")},
    "s2xs2": {"R": 4, "weyl": lambda exact: tc.weyl_from_eigenvalues(
        (Fraction(2, 3), Fraction(-1, 3), Fraction(-1, 3)),
        (Fraction(2, 3), Fraction(-1, 3), Fraction(-1, 3)), exact=exact),
        "curvature": tc.s2xs2_curvature,
        "chart": lambda: ch.s2xs2("polar"),
        "zmax": 1.2, "symmetries": "toric",
        "allowed_symmetries": ("diagonal", "bilateral", "quadrilateral")},
}
# the quotients are locally isometric to the product
COMPACT_FACTORS["s2xs2_z2"] = dict(COMPACT_FACTORS["s2xs2"],
                                   allowed_symmetries=("diagonal", "bilateral"))
COMPACT_FACTORS["rp2xrp2"] = dict(COMPACT_FACTORS["s2xs2"],
                                  allowed_symmetries=("diagonal",))

# AF factors: mass (exact or from a Green's function solution), asymptotic
# curvature model and expansion constant
AF_FACTORS = {
    "burns": {"mass": Fraction(2), "A": Fraction(1, 3),
              "weyl": COMPACT_FACTORS["fs"]["weyl"],
              "curvature": tc.fs_curvature,
              "chart": lambda greens=None: ch.burns_metric("inverted"),
              "xmin": 2.0 / np.pi + 1e-6, "mass_symbol": None},
    "s2xs2": {"mass": None, "A": None,
              "weyl": COMPACT_FACTORS["s2xs2"]["weyl"],
              "curvature": tc.s2xs2_curvature,
              "chart": None, "xmin": 1.25, "mass_symbol": "m1"},
    "s2xs2_z2": {"mass": None, "A": None,
                 "weyl": COMPACT_FACTORS["s2xs2"]["weyl"],
                 "curvature": tc.s2xs2_curvature,
                 "chart": None, "xmin": 1.25, "mass_symbol": "m2"},
    "rp2xrp2": {"mass": None, "A": None,
                "weyl": COMPACT_FACTORS["s2xs2"]["weyl"],
                "curvature": tc.s2xs2_curvature,
                "chart": None, "xmin": 1.25, "mass_symbol": "m3"},
}


class GluingError(ValueError):
    pass


@dataclass
class GluingConfig:
    """Connected-sum configuration: factors, scales, symmetry class."""

    compact: str = "fs"
    bubble: str = "burns"
    a: float = 0.25
    b: float = 0.25
    t: float = -1.0 / 3.0
    symmetry: str = "diagonal"
    flip: bool = False
    alignment: np.ndarray = None  # optional frame rotation of the bubble data
    refine_inner_radius: float = 1.5   # R0: AF-side correction off below this
    refine_outer_radius: float = 0.6   # Rc: compact-side correction off beyond

    def __post_init__(self):
        if self.compact not in COMPACT_FACTORS:
            raise GluingError(f"unknown compact factor {self.compact!r}")
        if self.bubble not in AF_FACTORS:
            raise GluingError(f"unknown AF factor {self.bubble!r}")
        if not (self.a > 0 and self.b > 0):
            raise GluingError("gluing scales must be positive")
        if self.symmetry not in SYMMETRY_BUBBLES:
            raise GluingError(f"unknown symmetry class {self.symmetry!r}")
        allowed = COMPACT_FACTORS[self.compact]["allowed_symmetries"]
        if self.symmetry not in allowed:
            raise GluingError(
                f"symmetry {self.symmetry!r} incompatible with compact factor "
                f"{self.compact!r} (base-point multiplicity)")
        zmax = COMPACT_FACTORS[self.compact]["zmax"]
        if 2 * self.b > zmax:
            raise GluingError(f"annulus |z| <= {2 * self.b} exceeds chart bound {zmax}")
        xmin = AF_FACTORS[self.bubble]["xmin"]
        if 1.0 / self.a < 2 * xmin:
            raise GluingError("AF annulus does not fit inside the bubble chart")

    @property
    def n_bubbles(self):
        return SYMMETRY_BUBBLES[self.symmetry]

    def to_config_text(self):
        lines = [f"compact = {self.compact}", f"bubble = {self.bubble}",
                 f"a = {self.a!r}", f"b = {self.b!r}", f"t = {self.t!r}",
                 f"symmetry = {self.symmetry}", f"flip = {int(self.flip)}"]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text):
        kv = ch.parse_config_text(text)
        return cls(compact=kv.get("compact", "fs"), bubble=kv.get("bubble", "burns"),
                   a=float(kv.get("a", 0.25)), b=float(kv.get("b", 0.25)),
                   t=float(kv.get("t", -1 / 3)), symmetry=kv.get("symmetry", "diagonal"),
                   flip=bool(int(kv.get("flip", 0))))


# ---------------------------------------------------------------------------
# smooth cutoff (1 below 1, 0 above 2) with derivative
# ---------------------------------------------------------------------------

_PHI_FUNCS = None


def _phi_funcs():
    global _PHI_FUNCS
    if _PHI_FUNCS is None:
        import sympy
        s = sympy.Symbol("s", real=True)
        g1 = sympy.exp(-1 / (2 - s))
        g2 = sympy.exp(-1 / (s - 1))
        phi = g1 / (g1 + g2)
        _PHI_FUNCS = [sympy.lambdify(s, phi, "numpy"),
                      sympy.lambdify(s, sympy.diff(phi, s), "numpy")]
    return _PHI_FUNCS


def phi_cutoff(tval, order=0):
    """Radial blending profile: 1 for t <= 1, 0 for t >= 2, smooth between."""
    tval = np.asarray(tval, dtype=float)
    out = np.zeros_like(tval)
    if order == 0:
        out = np.where(tval <= 1.0, 1.0, out)
    mid = (tval > 1.0) & (tval < 2.0)
    if np.any(mid):
        out[mid] = _phi_funcs()[order](tval[mid])
    return out


# ---------------------------------------------------------------------------
# correction tensors (numeric evaluators with exact partials)
# ---------------------------------------------------------------------------

def h2_tensor(Rm0, x):
    """-(1/3) Rm0[i,k,j,l] x^k x^l, batched."""
    x = np.asarray(x, dtype=float)
    return -np.einsum("ikjl,...k,...l->...ij", Rm0, x, x) / 3.0


def h2_tensor_partials(Rm0, x):
    x = np.asarray(x, dtype=float)
    d = -(np.einsum("ikjl,...l->...kij", Rm0, x)
          + np.einsum("iljk,...l->...kij", Rm0, x)) / 3.0
    return d


def hminus2_tensor(Rm0, A, x):
    """-(1/3) Rm0[i,k,j,l] x^k x^l / |x|^4 + 2 A delta / |x|^2, batched."""
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)[..., None, None]
    return h2_tensor(Rm0, x) / q ** 2 + (2.0 * A / q) * np.eye(4)


def hminus2_tensor_partials(Rm0, A, x):
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)[..., None, None, None]
    H2 = h2_tensor(Rm0, x)[..., None, :, :]
    dH2 = h2_tensor_partials(Rm0, x)
    xk = x[..., :, None, None]
    out = dH2 / q ** 2 - 4.0 * xk * H2 / q ** 3
    out = out - (4.0 * A * xk / q ** 2) * np.eye(4)
    return out


# ---------------------------------------------------------------------------
# glued charts
# ---------------------------------------------------------------------------

@dataclass
class GluedMetric:
    chart: ch.MetricChart
    weight: callable
    config: GluingConfig
    refined: bool
    af_chart: ch.MetricChart = None
    compact_chart: ch.MetricChart = None

    def positivity_report(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        pts = self.chart.sample_points(n, rng)
        worst = self.chart.min_eigenvalue(pts)
        return {"min_eigenvalue": worst, "positive_definite": bool(worst > 0)}


def _resolve_af_chart(cfg: GluingConfig, greens_solution=None):
    info = AF_FACTORS[cfg.bubble]
    if cfg.bubble == "burns":
        return ch.burns_metric("inverted")
    if greens_solution is None:
        raise GluingError(
            f"AF factor {cfg.bubble!r} requires a Green's function solution")
    from .greens import blowup_chart
    return blowup_chart(greens_solution, inner_radius=info["xmin"])


def build_glued_metric(cfg: GluingConfig, refined=False, greens_solution=None,
                       af_data=None):
    """Piecewise chart for the glued approximate metric in AF coordinates.

    The evaluator covers the full overlap region xmin < |x| < zmax/(ab);
    outside the damage zone [1/a, 2/a] it reproduces the factor metrics
    identically (the cutoff plateaus).  ``af_data`` may override the bubble's
    (curvature model, expansion constant) used by the refined correction.
    """
    compact = COMPACT_FACTORS[cfg.compact]
    af_chart = _resolve_af_chart(cfg, greens_solution)
    compact_chart = compact["chart"]()
    a, b = cfg.a, cfg.b
    ab = a * b
    Rm_z0 = np.asarray(compact["curvature"](), dtype=float)
    if af_data is not None:
        Rm_y0, A_y0 = af_data
    elif cfg.bubble == "burns":
        Rm_y0 = np.asarray(tc.fs_curvature(), dtype=float)
        A_y0 = 1.0 / 3.0
    else:
        if greens_solution is None:
            raise GluingError("refined metric needs the bubble expansion constant")
        Rm_y0 = np.asarray(tc.s2xs2_curvature(), dtype=float)
        A_y0 = greens_solution.A
    R0 = cfg.refine_inner_radius
    Rc = cfg.refine_outer_radius
    if refined and 2 * R0 > 1.0 / a:
        raise GluingError("AF-side correction cutoff overlaps the damage zone")
    if refined and 2 * b > Rc:
        raise GluingError("compact-side correction cutoff misses the damage zone")

    def comps(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        out = np.zeros(x.shape[:-1] + (4, 4))
        out[...] = np.eye(4)
        w_af = phi_cutoff(a * r)[..., None, None]
        w_z = 1.0 - w_af
        # AF side (evaluate only where it contributes)
        af_mask = w_af[..., 0, 0] > 0
        if np.any(af_mask):
            eta_N = af_chart.components(x[af_mask]) - np.eye(4)
            if refined:
                corr = (ab ** 2
                        * (1.0 - phi_cutoff(r[af_mask] / R0))[..., None, None]
                        * h2_tensor(Rm_z0, x[af_mask]))
                eta_N = eta_N + corr
            out[af_mask] += w_af[af_mask] * eta_N
        z_mask = w_z[..., 0, 0] > 0
        if np.any(z_mask):
            eta_Z = compact_chart.components(ab * x[z_mask]) - np.eye(4)
            if refined:
                corr = (phi_cutoff(ab * r[z_mask] / Rc)[..., None, None]
                        * hminus2_tensor(Rm_y0, A_y0, x[z_mask]))
                eta_Z = eta_Z + corr
            out[z_mask] += w_z[z_mask] * eta_Z
        return out

    def partials1(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        xhat = x / r[..., None]
        out = np.zeros(x.shape[:-1] + (4, 4, 4))
        w_af = phi_cutoff(a * r)
        dw_af = a * phi_cutoff(a * r, 1)[..., None] * xhat  # d_k phi(a r)
        af_mask = w_af > 0
        if np.any(af_mask):
            xm = x[af_mask]
            eta_N = af_chart.components(xm) - np.eye(4)
            deta_N = af_chart.partials1(xm)
            if refined:
                rm = r[af_mask]
                cut = 1.0 - phi_cutoff(rm / R0)
                dcut = -phi_cutoff(rm / R0, 1)[..., None] * xhat[af_mask] / R0
                H2 = h2_tensor(Rm_z0, xm)
                dH2 = h2_tensor_partials(Rm_z0, xm)
                eta_N = eta_N + ab ** 2 * cut[..., None, None] * H2
                deta_N = deta_N + ab ** 2 * (
                    cut[..., None, None, None] * dH2
                    + dcut[..., :, None, None] * H2[..., None, :, :])
            out[af_mask] += (w_af[af_mask][..., None, None, None] * deta_N
                             + dw_af[af_mask][..., :, None, None]
                             * eta_N[..., None, :, :])
        w_z = 1.0 - w_af
        z_mask = w_z > 0
        if np.any(z_mask):
            xm = x[z_mask]
            eta_Z = compact_chart.components(ab * xm) - np.eye(4)
            deta_Z = ab * compact_chart.partials1(ab * xm)
            if refined:
                rm = r[z_mask]
                cut = phi_cutoff(ab * rm / Rc)
                dcut = phi_cutoff(ab * rm / Rc, 1)[..., None] * xhat[z_mask] * ab / Rc
                Hm2 = hminus2_tensor(Rm_y0, A_y0, xm)
                dHm2 = hminus2_tensor_partials(Rm_y0, A_y0, xm)
                eta_Z = eta_Z + cut[..., None, None] * Hm2
                deta_Z = deta_Z + (cut[..., None, None, None] * dHm2
                                   + dcut[..., :, None, None] * Hm2[..., None, :, :])
            out[z_mask] += (w_z[z_mask][..., None, None, None] * deta_Z
                            - dw_af[z_mask][..., :, None, None]
                            * eta_Z[..., None, :, :])
        return out

    xmin = AF_FACTORS[cfg.bubble]["xmin"] * 1.05
    xmax = compact["zmax"] / ab

    def contains(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return (r2 > xmin ** 2) & (r2 < xmax ** 2)

    def margin(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return np.minimum(r - xmin, xmax - r)

    sym = (ch.u2_symmetry_elements() if compact["symmetries"] == "u2"
           and cfg.bubble == "burns" else ch.toric_symmetry_elements())
    chart = ch.MetricChart(
        name=f"glued({cfg.compact}+{cfg.bubble}{', refined' if refined else ''})",
        components=comps, contains=contains, boundary_margin=margin,
        coord_style="inverted", partials1=partials1,
        scale_hint=lambda x: 0.3 / a,
        symmetries=sym,
        params={"chart": "glued", "compact": cfg.compact, "bubble": cfg.bubble,
                "a": a, "b": b, "refined": refined,
                "sample_radius": (1.0 / a, 2.0 / a)})

    def weight(x):
        x = np.asarray(x, dtype=float)
        r = np.sqrt(np.sum(x * x, axis=-1))
        return np.clip(r, 1.0, 1.0 / ab)

    return GluedMetric(chart=chart, weight=weight, config=cfg, refined=refined,
                       af_chart=af_chart, compact_chart=compact_chart)


def build_naive_metric(cfg: GluingConfig, greens_solution=None):
    return build_glued_metric(cfg, refined=False, greens_solution=greens_solution)


def build_refined_metric(cfg: GluingConfig, greens_solution=None, af_data=None):
    return build_glued_metric(cfg, refined=True, greens_solution=greens_solution,
                              af_data=af_data)


# ---------------------------------------------------------------------------
# decay scans
# ---------------------------------------------------------------------------

def damage_zone_points(cfg: GluingConfig, n=200, seed=0):
    """Quasi-random sample of the blending annulus 1/a <= |x| <= 2/a."""
    from scipy.stats import qmc
    from scipy.special import ndtri
    m = int(np.ceil(np.log2(max(n, 4))))
    raw = qmc.Sobol(d=5, scramble=True, seed=seed).random_base2(m)[:n]
    dirs = ndtri(np.clip(raw[:, :4], 1e-12, 1 - 1e-12))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = (1.0 + raw[:, 4]) / cfg.a
    return dirs * radii[:, None]


def bt_sup_norm(glued: GluedMetric, n=200, seed=0, scheme=None):
    """Max |B^t|_g over damage-zone sample points."""
    scheme = scheme or FDScheme(nodes=7, richardson=1)
    pts = damage_zone_points(glued.config, n, seed)
    out = eng.curvature_batch(glued.chart, pts, t=glued.config.t, scheme=scheme)
    Bt, G = out["Bt"], out["ginv"]
    norms = np.sqrt(np.einsum("nij,nkl,nik,njl->n", Bt, Bt, G, G, optimize=True))
    return float(np.max(norms)), pts[int(np.argmax(norms))]


def bt_decay_scan(cfg_template: GluingConfig, a_values, refined=False, n_points=200,
                  seed=0, scheme=None, greens_solution=None):
    """Fitted decay exponent of sup |B^t| in the damage zone, a = b."""
    a_values = sorted(float(a) for a in a_values)
    if len(a_values) < 4:
        raise GluingError("need at least 4 gluing scales for a decay fit")
    sups = []
    for a in a_values:
        cfg = GluingConfig(compact=cfg_template.compact, bubble=cfg_template.bubble,
                           a=a, b=a, t=cfg_template.t,
                           symmetry=cfg_template.symmetry, flip=cfg_template.flip,
                           refine_inner_radius=cfg_template.refine_inner_radius,
                           refine_outer_radius=cfg_template.refine_outer_radius)
        glued = build_glued_metric(cfg, refined=refined,
                                   greens_solution=greens_solution)
        sup, _ = bt_sup_norm(glued, n_points, seed, scheme)
        sups.append(sup)
    slope, intercept, resid = eng.fit_decay_slope(a_values, sups)
    return {"a_values": a_values, "sup_bt": sups, "exponent": slope,
            "fit_residual": resid, "refined": refined,
            "compact": cfg_template.compact, "bubble": cfg_template.bubble,
            "t": cfg_template.t, "n_points": n_points}


# ---------------------------------------------------------------------------
# leading coefficient of the scaling obstruction
# ---------------------------------------------------------------------------

@dataclass
class LeadingTerm:
    """lambda(t) = lambda0 + lambda1 t and its root t0."""

    weyl_product: object
    R_z0: object
    mass: object
    omega3: float = OMEGA3
    lambda0: float = None
    lambda1: float = None
    t0: object = None
    t0_symbolic: str = None
    exact: bool = False

    def lam(self, t):
        return self.lambda0 + self.lambda1 * t

    def to_dict(self):
        def num(v):
            if isinstance(v, Fraction):
                return {"fraction": [v.numerator, v.denominator],
                        "value": float(v)}
            return v
        return {"weyl_product": num(self.weyl_product), "R_z0": num(self.R_z0),
                "mass": num(self.mass), "omega3": self.omega3,
                "lambda0": num(self.lambda0), "lambda1": num(self.lambda1),
                "t0": num(self.t0), "t0_symbolic": self.t0_symbolic,
                "exact": self.exact}


def aligned_bubble_weyl(cfg: GluingConfig, exact=True):
    """Weyl model of the bubble in the glued frame.

    The identity gluing map aligns the two normal frames directly; the
    optional flip conjugates by diag(-1, 1, 1, 1), and a further orthogonal
    alignment knob is applied last.
    """
    W = AF_FACTORS[cfg.bubble]["weyl"](exact and cfg.alignment is None
                                       and not cfg.flip)
    if cfg.flip:
        F = np.diag([-1.0, 1.0, 1.0, 1.0])
        W = tc.rotate_curvature(np.asarray(W, dtype=float), F)
    if cfg.alignment is not None:
        W = tc.rotate_curvature(np.asarray(W, dtype=float), np.asarray(cfg.alignment))
    return W


def leading_term(cfg: GluingConfig, mass=None, exact=None):
    """Leading Kuranishi coefficient and the critical parameter value.

    ``mass`` may be a number (computed bubble mass), None to use the exact
    Burns value or keep the row symbolic, or a mapping {m1, m2, m3}.
    """
    compact = COMPACT_FACTORS[cfg.compact]
    af = AF_FACTORS[cfg.bubble]
    if isinstance(mass, dict):
        mass = mass.get(af["mass_symbol"])
    if mass is None:
        mass = af["mass"]
    if exact is None:
        exact = isinstance(mass, (Fraction, int)) or mass is None
    Wz = compact["weyl"](exact and cfg.alignment is None and not cfg.flip)
    Wy = aligned_bubble_weyl(cfg, exact=exact)
    prod = tc.circ_product(Wz, Wy)
    Rz = compact["R"] if exact else float(compact["R"])
    if isinstance(prod, Fraction):
        coeff = -prod / (6 * Rz)  # t0 = coeff / mass
    else:
        coeff = -prod / (6.0 * float(Rz))
    symbol = af["mass_symbol"]
    if mass is None:
        # symbolic row: render as -k (9 m)^{-1}
        k = -9 * coeff
        sym = f"{_fmt_frac(-k)}/(9*{symbol})" if k != 0 else "0"
        return LeadingTerm(weyl_product=prod, R_z0=Rz, mass=None,
                           lambda0=None, lambda1=None, t0=None,
                           t0_symbolic=sym, exact=isinstance(prod, Fraction))
    if mass == 0 or Rz == 0:
        return LeadingTerm(weyl_product=prod, R_z0=Rz, mass=mass,
                           lambda0=(2 / 3) * float(prod) * OMEGA3,
                           lambda1=4 * OMEGA3 * float(Rz) * float(mass),
                           t0=None, t0_symbolic="undefined", exact=False)
    if isinstance(prod, Fraction) and isinstance(mass, (Fraction, int)):
        t0 = coeff / mass
        exact_flag = True
    else:
        t0 = float(coeff) / float(mass)
        exact_flag = False
    lam0 = (2.0 / 3.0) * float(prod) * OMEGA3
    lam1 = 4.0 * OMEGA3 * float(Rz) * float(mass)
    sym = None
    if symbol is not None and isinstance(coeff, Fraction):
        k = -9 * coeff
        sym = f"{_fmt_frac(-k)}/(9*{symbol})"
    elif exact_flag:
        sym = _fmt_frac(t0)
    return LeadingTerm(weyl_product=prod, R_z0=Rz, mass=mass, lambda0=lam0,
                       lambda1=lam1, t0=t0, t0_symbolic=sym, exact=exact_flag)


def _fmt_frac(v):
    v = Fraction(v) if not isinstance(v, Fraction) else v
    if v.denominator == 1:
        return str(v.numerator)
    return f"{v.numerator}/{v.denominator}"


# ---------------------------------------------------------------------------
# the published tables
# ---------------------------------------------------------------------------

TABLE_ROWS = {
    1: [
        ("CP2 # ~CP2", [("fs", "burns")], None),
        ("S2xS2 # ~CP2 = CP2 # 2 ~CP2", [("s2xs2", "burns"), ("fs", "s2xs2")], None),
        ("2 # S2xS2", [("s2xs2", "s2xs2")], None),
    ],
    2: [
        ("3 # S2xS2", [("s2xs2", "s2xs2")], "bilateral"),
        ("S2xS2 # 2 ~CP2 = CP2 # 3 ~CP2", [("s2xs2", "burns")], "bilateral"),
        ("CP2 # 3 ~CP2", [("fs", "burns")], "trilateral"),
        ("CP2 # 3 (S2xS2) = 4 CP2 # 3 ~CP2", [("fs", "s2xs2")], "trilateral"),
        ("S2xS2 # 4 ~CP2 = CP2 # 5 ~CP2", [("s2xs2", "burns")], "quadrilateral"),
        ("5 # S2xS2", [("s2xs2", "s2xs2")], "quadrilateral"),
    ],
    3: [
        ("(S2xS2/Z2) # ~CP2", [("s2xs2_z2", "burns"), ("fs", "s2xs2_z2")], None),
        ("(S2xS2/Z2) # S2xS2", [("s2xs2_z2", "s2xs2"), ("s2xs2", "s2xs2_z2")], None),
        ("(S2xS2/Z2) # (S2xS2/Z2)", [("s2xs2_z2", "s2xs2_z2")], None),
        ("(S2xS2/Z2) # RP2xRP2", [("s2xs2_z2", "rp2xrp2"), ("rp2xrp2", "s2xs2_z2")], None),
        ("RP2xRP2 # ~CP2", [("rp2xrp2", "burns"), ("fs", "rp2xrp2")], None),
        ("RP2xRP2 # S2xS2", [("rp2xrp2", "s2xs2"), ("s2xs2", "rp2xrp2")], None),
        ("RP2xRP2 # RP2xRP2", [("rp2xrp2", "rp2xrp2")], None),
    ],
    4: [
        ("S2xS2 # 2 (S2xS2/Z2)", [("s2xs2", "s2xs2_z2")], "bilateral"),
        ("S2xS2 # 2 (RP2xRP2)", [("s2xs2", "rp2xrp2")], "bilateral"),
        ("CP2 # 3 (S2xS2/Z2)", [("fs", "s2xs2_z2")], "trilateral"),
        ("CP2 # 3 (RP2xRP2)", [("fs", "rp2xrp2")], "trilateral"),
        ("S2xS2 # 4 (S2xS2/Z2)", [("s2xs2", "s2xs2_z2")], "quadrilateral"),
        ("S2xS2 # 4 (RP2xRP2)", [("s2xs2", "rp2xrp2")], "quadrilateral"),
        ("(S2xS2/Z2) # 2 ~CP2", [("s2xs2_z2", "burns")], "bilateral"),
        ("(S2xS2/Z2) # 2 (S2xS2)", [("s2xs2_z2", "s2xs2")], "bilateral"),
        ("3 # (S2xS2/Z2)", [("s2xs2_z2", "s2xs2_z2")], "bilateral"),
        ("(S2xS2/Z2) # 2 (RP2xRP2)", [("s2xs2_z2", "rp2xrp2")], "bilateral"),
    ],
}

# multi-bubble rows use a single-bubble symmetry class for the pairings
_PAIR_SYMMETRY = {"fs": "diagonal", "s2xs2": "diagonal",
                  "s2xs2_z2": "diagonal", "rp2xrp2": "diagonal"}


def table_entry(compact, bubble, masses=None):
    cfg = GluingConfig(compact=compact, bubble=bubble,
                       symmetry=_PAIR_SYMMETRY[compact])
    return leading_term(cfg, mass=masses)


def emit_tables(which, masses=None):
    """Reproduce one of the published critical-parameter tables.

    ``masses``: optional {"m1": .., "m2": .., "m3": ..}; rows depending on a
    mass render symbolically as -k/(9 m) and numerically when the mass is
    supplied.  Burns-bubble rows are exact rationals.
    """
    if which not in TABLE_ROWS:
        raise ValueError("tables are numbered 1 to 4")
    rows = []
    for topology, pairings, symmetry in TABLE_ROWS[which]:
        entries = [table_entry(c, bb, masses) for (c, bb) in pairings]
        row = {
            "topology": topology,
            "t0": [e.t0_symbolic if e.t0 is None else
                   (_fmt_frac(e.t0) if e.exact else e.t0) for e in entries],
            "t0_numeric": [None if e.t0 is None else float(e.t0) for e in entries],
            "t0_symbolic": [e.t0_symbolic for e in entries],
        }
        if symmetry:
            row["symmetry"] = symmetry
        rows.append(row)
    return {"table": which, "rows": rows}


def tables_to_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf)
    has_sym = any("symmetry" in row for row in table["rows"])
    header = ["topology", "t0"] + (["symmetry"] if has_sym else [])
    writer.writerow(header)
    for row in table["rows"]:
        vals = "; ".join(str(v) for v in row["t0"])
        line = [row["topology"], vals]
        if has_sym:
            line.append(row.get("symmetry", ""))
        writer.writerow(line)
    return buf.getvalue()


def tables_to_json(table):
    def default(v):
        if isinstance(v, Fraction):
            return str(v)
        raise TypeError(v)
    return json.dumps(table, sort_keys=True, indent=1, default=default)


# ---------------------------------------------------------------------------
# cokernel asymptotics on the AF factor
# ---------------------------------------------------------------------------

def cokernel_form(x, b_matrix):
    """omega_j = x_j + b_jk x^k / |x|^2 and its exact partials."""
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)[..., None]
    w = x + (x @ b_matrix.T) / q
    return w


def cokernel_form_partials(x, b_matrix):
    x = np.asarray(x, dtype=float)
    q = np.sum(x * x, axis=-1)[..., None, None]
    bx = (x @ b_matrix.T)[..., None, :]  # [..., 1, j]
    eye = np.eye(4)
    # d_i w_j = delta_ij + b_ji / q - 2 x_i (b x)_j / q^2
    return (eye + b_matrix.T / q
            - 2.0 * x[..., :, None] * bx / q ** 2)


def conf_killing_of_form(chart, pts, b_matrix, scheme=None):
    """K[omega] at the sample points, with exact form derivatives."""
    data = eng.curvature_fields(chart, pts, scheme)
    g, G, Gam = data["g"], data["ginv"], data["Gamma"]
    w = cokernel_form(pts, b_matrix)
    dw = cokernel_form_partials(pts, b_matrix)
    nab = dw - np.einsum("...cab,...c->...ab", Gam, w)
    L = nab + np.swapaxes(nab, -1, -2)
    divw = np.einsum("...ab,...ab->...", G, nab)
    return L - 0.5 * divw[..., None, None] * g, data


def box_of_form(chart, pts, b_matrix, scheme=None, step_frac=0.02):
    """Box omega = div K[omega], outer derivative by order-6 differences."""
    from ._stencil import fornberg_weights
    pts = np.asarray(pts, dtype=float)
    offs = np.arange(-3, 4, dtype=float)
    out = np.zeros(pts.shape[:-1] + (4,))
    K0, data = conf_killing_of_form(chart, pts, b_matrix, scheme)
    G, Gam = data["ginv"], data["Gamma"]
    r = np.sqrt(np.sum(pts * pts, axis=-1))
    h = step_frac * r
    dK = np.zeros(pts.shape[:-1] + (4, 4, 4))
    for axis in range(4):
        w1 = fornberg_weights(1, offs)
        shifted = (pts[..., None, :]
                   + (h[..., None] * offs)[..., :, None] * np.eye(4)[axis])
        Ks, _ = conf_killing_of_form(chart, shifted.reshape(-1, 4), b_matrix, scheme)
        Ks = Ks.reshape(pts.shape[:-1] + (len(offs), 4, 4))
        dK[..., axis, :, :] = np.einsum("...nij,n->...ij", Ks, w1) / h[..., None, None]
    cd = (dK - np.einsum("...mki,...mj->...kij", Gam, K0)
          - np.einsum("...mkj,...im->...kij", Gam, K0))
    return np.einsum("...ik,...kij->...j", G, cd)


def cokernel_asymptotics_check(radii=None, n_dirs=6, seed=3, af="burns",
                               chart=None, Rm0=None, A=None):
    """Decay checks of the AF-cokernel form on the Burns chart.

    Verifies that K[omega] has leading coefficient (2/3) W[i,k,j,l](y0)
    x^k x^l / |x|^4, that the remainder decays at least like |x|^(-4+eps),
    and that Box omega decays like |x|^{-4}.
    """
    radii = np.asarray(radii if radii is not None else
                       [10.0, 18.0, 32.0, 56.0, 100.0], dtype=float)
    if chart is None:
        if af != "burns":
            raise ValueError("default checks run on the Burns chart")
        chart = ch.burns_metric("inverted")
        Rm0 = np.asarray(tc.fs_curvature(), dtype=float)
        A = 1.0 / 3.0
    W0, Ric0, R0, S0 = tc.decompose_curvature(Rm0, np.eye(4))
    b_matrix = -S0 / 3.0 + 2.0 * A * np.eye(4)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_dirs, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    def kappa_lead(x):
        q = np.sum(x * x, axis=-1)[..., None, None]
        return (2.0 / 3.0) * np.einsum("ikjl,...k,...l->...ij", W0, x, x) / q ** 2

    resid, box_norm, lead_rel = [], [], []
    for R in radii:
        pts = R * dirs
        K, _ = conf_killing_of_form(chart, pts, b_matrix)
        lead = kappa_lead(pts)
        resid.append(float(np.max(np.abs(K - lead))))
        scale = np.max(np.abs(lead))
        lead_rel.append(float(np.max(np.abs(K - lead)) / scale) if scale > 0 else 0.0)
        box = box_of_form(chart, pts, b_matrix)
        box_norm.append(float(np.max(np.abs(box))))
    k_slope, _, _ = eng.fit_decay_slope(radii, resid)
    b_slope, _, _ = eng.fit_decay_slope(radii, box_norm)
    # componentwise leading-coefficient match at |x| = 50
    pts50 = 50.0 * dirs
    K50, _ = conf_killing_of_form(chart, pts50, b_matrix)
    lead50 = kappa_lead(pts50)
    denom = np.max(np.abs(lead50))
    coeff_rel = float(np.max(np.abs(K50 - lead50)) / denom) if denom > 0 else 0.0
    return {
        "radii": radii.tolist(), "kappa_residual": resid,
        "kappa_residual_slope": k_slope, "box_norms": box_norm,
        "box_slope": b_slope, "coefficient_rel_error_at_50": coeff_rel,
        "lead_rel_by_radius": lead_rel,
    }
