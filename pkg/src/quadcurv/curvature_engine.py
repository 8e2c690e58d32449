"""From metric charts to curvature, and the differential operators.

The pipeline is pointwise: partial-derivative arrays of the metric (exact
from the chart where available, finite differences otherwise) feed explicit
product-rule chains for the Christoffel symbols and their partials, the
curvature tensor and its first two covariant derivatives, and finally the
gradient tensors of the quadratic curvature functionals.

Layout conventions (derivative axes always leftmost):

    D1[a, i, j]        = d_a g_ij
    Gamma[k, i, j]     = Gamma^k_ij
    Rm[i, j, k, l]     : pair-antisymmetric, Rm[0,1,0,1] = +K on round spheres
    (cov. derivatives) CD1[a, ...], CD2[b, a, ...] = nabla_b nabla_a T

The gradient of the Weyl functional is assembled as

    Bach_ij = -4 ( g^{kb} g^{la} nabla_b nabla_a W[i,k,j,l]
                   + (1/2) Ric^{kl} W[i,k,j,l] ),

symmetrized; the sign set is pinned by the Einstein and conformal-invariance
checks in the test suite.  The gradient of the scalar-curvature-squared
functional is

    C_ij = 2 nabla_i nabla_j R - 2 (Lap R) g_ij - 2 R Ric_ij + (1/2) R^2 g_ij.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import tensor_core as tc
from ._stencil import FDScheme, InsufficientMarginError, derivative_arrays
from .charts import MetricChart

__all__ = [
    "FDScheme", "InsufficientMarginError", "CurvatureBundle", "DiffOpResult",
    "curvature_at", "curvature_fields", "apply_operator",
    "flat_linearized_s0", "h2_field", "hminus2_field",
    "verify_ricci_asymptotics", "functional_value", "fit_decay_slope",
]


# ---------------------------------------------------------------------------
# partial-derivative chains
# ---------------------------------------------------------------------------

def inverse_metric_partials(D, order):
    """Partials of g^{-1} up to ``order`` from partials of g."""
    g = D[0]
    G = np.linalg.inv(g)
    out = [G]
    if order >= 1:
        dG = -np.einsum("...im,...amn,...nj->...aij", G, D[1], G)
        out.append(dG)
    if order >= 2:
        d2G = (
            -np.einsum("...bim,...amn,...nj->...abij", out[1], D[1], G)
            - np.einsum("...im,...abmn,...nj->...abij", G, D[2], G)
            - np.einsum("...im,...amn,...bnj->...abij", G, D[1], out[1])
        )
        out.append(d2G)
    if order >= 3:
        dG, d2G = out[1], out[2]
        d3G = (
            -np.einsum("...bcim,...amn,...nj->...abcij", d2G, D[1], G)
            - np.einsum("...bim,...acmn,...nj->...abcij", dG, D[2], G)
            - np.einsum("...bim,...amn,...cnj->...abcij", dG, D[1], dG)
            - np.einsum("...cim,...abmn,...nj->...abcij", dG, D[2], G)
            - np.einsum("...im,...abcmn,...nj->...abcij", G, D[3], G)
            - np.einsum("...im,...abmn,...cnj->...abcij", G, D[2], dG)
            - np.einsum("...cim,...amn,...bnj->...abcij", dG, D[1], dG)
            - np.einsum("...im,...acmn,...bnj->...abcij", G, D[2], dG)
            - np.einsum("...im,...amn,...bcnj->...abcij", G, D[1], d2G)
        )
        out.append(d3G)
    return out


def christoffel_partials(D, Ginv, order):
    """Gamma and its partials up to ``order`` (layouts [..., k, i, j])."""
    def sym_term(Dk, extra=0):
        # T[..., m, i, j] = d_i g_jm + d_j g_im - d_m g_ij, with ``extra``
        # outer derivative axes passed through
        lead = "xyz"[:extra]
        return (np.einsum(f"...{lead}ijm->...{lead}mij", Dk)
                + np.einsum(f"...{lead}jim->...{lead}mij", Dk)
                - Dk)

    T0 = sym_term(D[1])
    out = [0.5 * np.einsum("...km,...mij->...kij", Ginv[0], T0)]
    if order >= 1:
        T1 = sym_term(D[2], 1)
        out.append(0.5 * (np.einsum("...akm,...mij->...akij", Ginv[1], T0)
                          + np.einsum("...km,...amij->...akij", Ginv[0], T1)))
    if order >= 2:
        T1 = sym_term(D[2], 1)
        T2 = sym_term(D[3], 2)
        out.append(0.5 * (np.einsum("...abkm,...mij->...abkij", Ginv[2], T0)
                          + np.einsum("...akm,...bmij->...abkij", Ginv[1], T1)
                          + np.einsum("...bkm,...amij->...abkij", Ginv[1], T1)
                          + np.einsum("...km,...abmij->...abkij", Ginv[0], T2)))
    if order >= 3:
        T1, T2, T3 = sym_term(D[2], 1), sym_term(D[3], 2), sym_term(D[4], 3)
        out.append(0.5 * (
            np.einsum("...abckm,...mij->...abckij", Ginv[3], T0)
            + np.einsum("...abkm,...cmij->...abckij", Ginv[2], T1)
            + np.einsum("...ackm,...bmij->...abckij", Ginv[2], T1)
            + np.einsum("...bckm,...amij->...abckij", Ginv[2], T1)
            + np.einsum("...akm,...bcmij->...abckij", Ginv[1], T2)
            + np.einsum("...bkm,...acmij->...abckij", Ginv[1], T2)
            + np.einsum("...ckm,...abmij->...abckij", Ginv[1], T2)
            + np.einsum("...km,...abcmij->...abckij", Ginv[0], T3)))
    return out


def riemann_partials(g_parts, Gam, order):
    """(0,4) curvature tensor and its partials up to ``order``.

    Rm[i,j,k,l] = -g_{lm} (d_i Gamma^m_jk - d_j Gamma^m_ik
                           + Gamma^m_ip Gamma^p_jk - Gamma^m_jp Gamma^p_ik),
    which places the positive sectional curvatures of the round metrics at
    Rm[i,j,i,j].
    """
    D = g_parts
    # order 0
    U0 = (np.einsum("...imjk->...mkij", Gam[1]) - np.einsum("...jmik->...mkij", Gam[1])
          + np.einsum("...mip,...pjk->...mkij", Gam[0], Gam[0])
          - np.einsum("...mjp,...pik->...mkij", Gam[0], Gam[0]))
    Rm0 = -np.einsum("...lm,...mkij->...ijkl", D[0], U0)
    out = [Rm0]
    if order >= 1:
        U1 = (np.einsum("...aimjk->...amkij", Gam[2]) - np.einsum("...ajmik->...amkij", Gam[2])
              + np.einsum("...amip,...pjk->...amkij", Gam[1], Gam[0])
              + np.einsum("...mip,...apjk->...amkij", Gam[0], Gam[1])
              - np.einsum("...amjp,...pik->...amkij", Gam[1], Gam[0])
              - np.einsum("...mjp,...apik->...amkij", Gam[0], Gam[1]))
        Rm1 = -(np.einsum("...alm,...mkij->...aijkl", D[1], U0)
                + np.einsum("...lm,...amkij->...aijkl", D[0], U1))
        out.append(Rm1)
    if order >= 2:
        U1 = (np.einsum("...aimjk->...amkij", Gam[2]) - np.einsum("...ajmik->...amkij", Gam[2])
              + np.einsum("...amip,...pjk->...amkij", Gam[1], Gam[0])
              + np.einsum("...mip,...apjk->...amkij", Gam[0], Gam[1])
              - np.einsum("...amjp,...pik->...amkij", Gam[1], Gam[0])
              - np.einsum("...mjp,...apik->...amkij", Gam[0], Gam[1]))
        U2 = (np.einsum("...abimjk->...abmkij", Gam[3]) - np.einsum("...abjmik->...abmkij", Gam[3])
              + np.einsum("...abmip,...pjk->...abmkij", Gam[2], Gam[0])
              + np.einsum("...amip,...bpjk->...abmkij", Gam[1], Gam[1])
              + np.einsum("...bmip,...apjk->...abmkij", Gam[1], Gam[1])
              + np.einsum("...mip,...abpjk->...abmkij", Gam[0], Gam[2])
              - np.einsum("...abmjp,...pik->...abmkij", Gam[2], Gam[0])
              - np.einsum("...amjp,...bpik->...abmkij", Gam[1], Gam[1])
              - np.einsum("...bmjp,...apik->...abmkij", Gam[1], Gam[1])
              - np.einsum("...mjp,...abpik->...abmkij", Gam[0], Gam[2]))
        Rm2 = -(np.einsum("...ablm,...mkij->...abijkl", D[2], U0)
                + np.einsum("...alm,...bmkij->...abijkl", D[1], U1)
                + np.einsum("...blm,...amkij->...abijkl", D[1], U1)
                + np.einsum("...lm,...abmkij->...abijkl", D[0], U2))
        out.append(Rm2)
    return out


_LETTERS = "ijklmn"


def _cov1(T, dT, Gamma, nslots=None):
    """First covariant derivative of a (0, m) tensor: CD1[..., a, slots]."""
    m = T.ndim if nslots is None else nslots
    slots = _LETTERS[:m]
    out = dT.copy()
    for r in range(m):
        repl = slots[:r] + "c" + slots[r + 1:]
        out = out - np.einsum(f"...ca{slots[r]},...{repl}->...a{slots}", Gamma, T)
    return out


def _cov2(T, dT, d2T, Gamma, dGamma, nslots=None):
    """Second covariant derivative: CD2[..., b, a, slots] = nabla_b nabla_a T."""
    m = T.ndim if nslots is None else nslots
    slots = _LETTERS[:m]
    cd1 = _cov1(T, dT, Gamma, m)
    # partials of cd1
    dcd1 = d2T.copy()  # layout (..., b, a, slots)
    for r in range(m):
        repl = slots[:r] + "c" + slots[r + 1:]
        dcd1 = dcd1 - np.einsum(f"...bca{slots[r]},...{repl}->...ba{slots}", dGamma, T)
        dcd1 = dcd1 - np.einsum(f"...ca{slots[r]},...b{repl}->...ba{slots}", Gamma, dT)
    # covariant correction treating cd1 as a (0, m+1) tensor
    out = dcd1 - np.einsum(f"...cba,...c{slots}->...ba{slots}", Gamma, cd1)
    for r in range(m):
        repl = slots[:r] + "c" + slots[r + 1:]
        out = out - np.einsum(f"...cb{slots[r]},...a{repl}->...ba{slots}", Gamma, cd1)
    return out


# ---------------------------------------------------------------------------
# the curvature bundle
# ---------------------------------------------------------------------------

@dataclass
class CurvatureBundle:
    """All curvature quantities of a chart at one point."""

    point: np.ndarray
    t: float
    g: np.ndarray
    ginv: np.ndarray = field(repr=False)
    Gamma: np.ndarray = field(repr=False)
    Rm: np.ndarray = field(repr=False)
    Ric: np.ndarray = field(repr=False)
    R: float = 0.0
    E: np.ndarray = None
    S: np.ndarray = None
    W: np.ndarray = None
    Bach: np.ndarray = None
    C: np.ndarray = None
    Bt: np.ndarray = None
    truncation: float = 0.0
    bianchi_residual: float = 0.0
    bach_trace: float = 0.0

    def norm2(self, T):
        return tc.tensor_norm2(T, self.ginv)

    def rm_norm2(self):
        return self.norm2(self.Rm)

    def to_dict(self):
        def arr(a):
            return np.asarray(a).tolist() if a is not None else None
        return {
            "point": arr(self.point), "t": self.t, "R": self.R,
            "g": arr(self.g), "Ric": arr(self.Ric), "E": arr(self.E),
            "S": arr(self.S), "W": arr(self.W), "Bach": arr(self.Bach),
            "C": arr(self.C), "Bt": arr(self.Bt),
            "norms": {
                "W2": self.norm2(self.W), "Rm2": self.rm_norm2(),
                "Bach": float(np.sqrt(self.norm2(self.Bach))),
                "Bt": float(np.sqrt(self.norm2(self.Bt))),
            },
            "diagnostics": {
                "truncation": self.truncation,
                "bianchi_residual": self.bianchi_residual,
                "bach_trace": self.bach_trace,
            },
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def bundle_arrays(D, t=0.0):
    """All curvature quantities from metric partials D0..D4 (batch-aware).

    Returns a dict of arrays carrying any leading batch axes of the D's.
    """
    Ginv = inverse_metric_partials(D, 3)
    Gam = christoffel_partials(D, Ginv, 3)
    Rm_parts = riemann_partials(D, Gam, 2)
    g, G = D[0], Ginv[0]
    Rm = Rm_parts[0]

    Ric = np.einsum("...ik,...ijkl->...jl", G, Rm)
    R = np.einsum("...jl,...jl->...", G, Ric)
    Rb = R[..., None, None]
    E = Ric - 0.25 * Rb * g
    S = 0.5 * (Ric - (Rb / 6.0) * g)
    W = Rm - _kn_batched(S, g)

    # partials of Ric and R
    dRic = (np.einsum("...aik,...ijkl->...ajl", Ginv[1], Rm)
            + np.einsum("...ik,...aijkl->...ajl", G, Rm_parts[1]))
    d2Ric = (np.einsum("...abik,...ijkl->...abjl", Ginv[2], Rm)
             + np.einsum("...aik,...bijkl->...abjl", Ginv[1], Rm_parts[1])
             + np.einsum("...bik,...aijkl->...abjl", Ginv[1], Rm_parts[1])
             + np.einsum("...ik,...abijkl->...abjl", G, Rm_parts[2]))
    dR = (np.einsum("...ajl,...jl->...a", Ginv[1], Ric)
          + np.einsum("...jl,...ajl->...a", G, dRic))
    d2R = (np.einsum("...abjl,...jl->...ab", Ginv[2], Ric)
           + np.einsum("...ajl,...bjl->...ab", Ginv[1], dRic)
           + np.einsum("...bjl,...ajl->...ab", Ginv[1], dRic)
           + np.einsum("...jl,...abjl->...ab", G, d2Ric))

    hessR = d2R - np.einsum("...cab,...c->...ab", Gam[0], dR)
    hessR = 0.5 * (hessR + np.swapaxes(hessR, -1, -2))
    lapR = np.einsum("...ab,...ab->...", G, hessR)

    # second covariant derivative of W = Rm - S ^ g  (g is parallel)
    cd2Rm = _cov2(Rm, Rm_parts[1], Rm_parts[2], Gam[0], Gam[1], nslots=4)
    dS = 0.5 * (dRic - np.einsum("...a,...ij->...aij", dR, g) / 6.0
                - (Rb[..., None] / 6.0) * D[1])
    d2S = 0.5 * (d2Ric - np.einsum("...ab,...ij->...abij", d2R, g) / 6.0
                 - np.einsum("...a,...bij->...abij", dR, D[1]) / 6.0
                 - np.einsum("...b,...aij->...abij", dR, D[1]) / 6.0
                 - (Rb[..., None, None] / 6.0) * D[2])
    cd2S = _cov2(S, dS, d2S, Gam[0], Gam[1], nslots=2)
    cd2W = cd2Rm - _kn_with_metric(cd2S, g)

    # gradient of the Weyl functional:  B = -4 ( div div W + (1/2) Ric . W )
    Ric_up = np.einsum("...ka,...lb,...ab->...kl", G, G, Ric)
    div2W = np.einsum("...kb,...la,...baikjl->...ij", G, G, cd2W)
    ricW = np.einsum("...kl,...ikjl->...ij", Ric_up, W)
    Bach = -4.0 * (div2W + 0.5 * ricW)
    Bach = 0.5 * (Bach + np.swapaxes(Bach, -1, -2))

    C = (2.0 * hessR - 2.0 * lapR[..., None, None] * g - 2.0 * Rb * Ric
         + 0.5 * Rb * Rb * g)
    Bt = Bach + t * C

    # diagnostics: contracted second Bianchi (div Ric = dR / 2), tr Bach
    cd1Ric = _cov1(Ric, dRic, Gam[0], nslots=2)
    divRic = np.einsum("...ai,...aij->...j", G, cd1Ric)
    bianchi = np.max(np.abs(divRic - 0.5 * dR), axis=-1)
    bach_trace = np.abs(np.einsum("...ij,...ij->...", G, Bach))

    return {"g": g, "ginv": G, "Gamma": Gam[0], "Rm": Rm, "Ric": Ric, "R": R,
            "E": E, "S": S, "W": W, "Bach": Bach, "C": C, "Bt": Bt,
            "bianchi_residual": bianchi, "bach_trace": bach_trace}


def curvature_at(chart: MetricChart, p, t=0.0, scheme: FDScheme = None):
    """Full curvature bundle (including Bach, C and B^t) at a point."""
    D, trunc = derivative_arrays(chart, p, 4, scheme)
    q = bundle_arrays(D, t)
    return CurvatureBundle(
        point=np.asarray(p, dtype=float), t=t, g=q["g"], ginv=q["ginv"],
        Gamma=q["Gamma"], Rm=q["Rm"], Ric=q["Ric"], R=float(q["R"]), E=q["E"],
        S=q["S"], W=q["W"], Bach=q["Bach"], C=q["C"], Bt=q["Bt"],
        truncation=trunc, bianchi_residual=float(q["bianchi_residual"]),
        bach_trace=float(q["bach_trace"]))


def curvature_batch(chart: MetricChart, pts, t=0.0, scheme: FDScheme = None,
                    chunk=64):
    """Batched full-curvature evaluation; returns a dict of stacked arrays.

    Points are processed in chunks to bound the memory of the stencil
    lattices (the full jet needs nodes^4 metric evaluations per point).
    """
    from ._stencil import derivative_arrays_batch
    pts = np.asarray(pts, dtype=float)
    pieces = []
    trunc = 0.0
    for lo in range(0, len(pts), chunk):
        D, tr = derivative_arrays_batch(chart, pts[lo:lo + chunk], 4, scheme)
        pieces.append(bundle_arrays(D, t))
        trunc = max(trunc, tr)
    out = {k: np.concatenate([p[k] for p in pieces], axis=0) for k in pieces[0]}
    out["truncation"] = trunc
    return out


def _kn_with_metric(cd2A, g):
    """Kulkarni-Nomizu of a twice-differentiated 2-tensor with the metric."""
    return (np.einsum("...baik,...jl->...baijkl", cd2A, g)
            - np.einsum("...bail,...jk->...baijkl", cd2A, g)
            + np.einsum("...bajl,...ik->...baijkl", cd2A, g)
            - np.einsum("...bajk,...il->...baijkl", cd2A, g))


def curvature_fields(chart: MetricChart, pts, scheme: FDScheme = None):
    """Batched order-2 curvature data (g, Gamma, Rm, Ric, R, S, W, E).

    Uses the chart's analytic first derivatives plus per-axis stencils for
    the second derivatives; falls back to per-axis stencils throughout.
    """
    scheme = scheme or FDScheme()
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None]
    g = chart.components(pts)
    D1, D2 = _batched_g_partials(chart, pts, scheme)
    G = np.linalg.inv(g)

    def sym_term(Dk, lead=""):
        return (np.einsum(f"...{lead}ijm->...{lead}mij", Dk)
                + np.einsum(f"...{lead}jim->...{lead}mij", Dk)
                - Dk)

    T0 = sym_term(D1)
    Gam = 0.5 * np.einsum("...km,...mij->...kij", G, T0)
    dGinv = -np.einsum("...im,...amn,...nj->...aij", G, D1, G)
    T1 = sym_term(D2, "a")
    dGam = 0.5 * (np.einsum("...akm,...mij->...akij", dGinv, T0)
                  + np.einsum("...km,...amij->...akij", G, T1))
    U0 = (np.einsum("...imjk->...mkij", dGam) - np.einsum("...jmik->...mkij", dGam)
          + np.einsum("...mip,...pjk->...mkij", Gam, Gam)
          - np.einsum("...mjp,...pik->...mkij", Gam, Gam))
    Rm = -np.einsum("...lm,...mkij->...ijkl", g, U0)
    Ric = np.einsum("...ik,...ijkl->...jl", G, Rm)
    R = np.einsum("...jl,...jl->...", G, Ric)
    E = Ric - 0.25 * R[..., None, None] * g
    S = 0.5 * (Ric - R[..., None, None] / 6.0 * g)
    W = Rm - _kn_batched(S, g)
    out = {"g": g, "ginv": G, "Gamma": Gam, "Rm": Rm, "Ric": Ric, "R": R,
           "E": E, "S": S, "W": W}
    if single:
        out = {k: v[0] for k, v in out.items()}
    return out


def _kn_batched(A, B):
    return (np.einsum("...ik,...jl->...ijkl", A, B)
            - np.einsum("...il,...jk->...ijkl", A, B)
            + np.einsum("...jl,...ik->...ijkl", A, B)
            - np.einsum("...jk,...il->...ijkl", A, B))


def _batched_g_partials(chart, pts, scheme):
    """First and second metric partials on a batch of points.

    Layouts: D1[..., a, i, j], D2[..., a, b, i, j].
    """
    from ._stencil import fornberg_weights
    h = scheme.rel_step * float(chart.scale_hint(pts))
    margin = float(np.min(chart.boundary_margin(pts)))
    if margin < 6 * h:
        h = max(margin / 8.0, 1e-8)
    r = scheme.nodes // 2
    offs = np.arange(-r, r + 1, dtype=float)
    w1 = fornberg_weights(1, offs) / h
    w2 = fornberg_weights(2, offs) / h ** 2
    if chart.partials1 is not None:
        D1 = chart.partials1(pts)
        # D2[..., a, m, i, j] from per-axis stencils of partials1
        D2 = np.zeros(pts.shape[:-1] + (4, 4, 4, 4))
        for a in range(4):
            shifted = pts[..., None, :] + h * offs[:, None] * np.eye(4)[a]
            vals = chart.partials1(shifted.reshape(-1, 4)).reshape(
                pts.shape[:-1] + (len(offs), 4, 4, 4))
            D2[..., a, :, :, :] = np.einsum("...nmij,n->...mij", vals, w1)
        return D1, D2
    D1 = np.zeros(pts.shape[:-1] + (4, 4, 4))
    D2 = np.zeros(pts.shape[:-1] + (4, 4, 4, 4))
    for a in range(4):
        shifted = pts[..., None, :] + h * offs[:, None] * np.eye(4)[a]
        vals = chart.components(shifted.reshape(-1, 4)).reshape(
            pts.shape[:-1] + (len(offs), 4, 4))
        D1[..., a, :, :] = np.einsum("...nij,n->...ij", vals, w1)
        D2[..., a, a, :, :] = np.einsum("...nij,n->...ij", vals, w2)
    for a in range(4):
        for b in range(a + 1, 4):
            grid = (pts[..., None, None, :]
                    + h * offs[:, None, None] * np.eye(4)[a]
                    + h * offs[None, :, None] * np.eye(4)[b])
            vals = chart.components(grid.reshape(-1, 4)).reshape(
                pts.shape[:-1] + (len(offs), len(offs), 4, 4))
            mixed = np.einsum("...mnij,m,n->...ij", vals, w1, w1)
            D2[..., a, b, :, :] = mixed
            D2[..., b, a, :, :] = mixed
    return D1, D2


# ---------------------------------------------------------------------------
# differential operators
# ---------------------------------------------------------------------------

@dataclass
class DiffOpResult:
    operator: str
    point: np.ndarray
    value: np.ndarray
    truncation: float = float("nan")

    def to_dict(self):
        return {"operator": self.operator, "point": np.asarray(self.point).tolist(),
                "value": np.asarray(self.value).tolist(), "truncation": self.truncation}


def _field_partials(fieldfn, p, h, nodes=9):
    from ._stencil import fornberg_weights
    r = nodes // 2
    offs = np.arange(-r, r + 1, dtype=float)
    w1 = fornberg_weights(1, offs) / h
    w2 = fornberg_weights(2, offs) / h ** 2
    val = np.asarray(fieldfn(np.asarray(p, dtype=float)))
    d1 = np.zeros((4,) + val.shape)
    d2diag = np.zeros((4,) + val.shape)
    for a in range(4):
        shifted = p + h * offs[:, None] * np.eye(4)[a]
        vals = np.stack([np.asarray(fieldfn(s)) for s in shifted])
        d1[a] = np.einsum("n...,n->...", vals, w1)
        d2diag[a] = np.einsum("n...,n->...", vals, w2)
    return val, d1, d2diag


def apply_operator(op, chart: MetricChart, fieldfn: Callable, p,
                   scheme: FDScheme = None):
    """Apply a covariant operator to a tensor field at a point.

    op in {'div', 'killing', 'conf_killing', 'box', 'conf_laplacian'};
    ``fieldfn`` maps a point (4,) to a scalar, 1-form (4,) or Sym2 (4,4)
    as appropriate.
    """
    scheme = scheme or FDScheme()
    p = np.asarray(p, dtype=float)
    data = curvature_fields(chart, p, scheme)
    g, G, Gam = data["g"], data["ginv"], data["Gamma"]
    h = scheme.rel_step * float(chart.scale_hint(p))

    if op == "conf_laplacian":
        u, du, d2u = _field_partials(fieldfn, p, h, scheme.nodes)
        hess = np.zeros((4, 4))
        for a in range(4):
            hess[a, a] = d2u[a]
        # mixed second partials
        from ._stencil import fornberg_weights
        r = scheme.nodes // 2
        offs = np.arange(-r, r + 1, dtype=float)
        w1 = fornberg_weights(1, offs) / h
        for a in range(4):
            for b in range(a + 1, 4):
                vals = np.array([[float(fieldfn(p + h * (m * np.eye(4)[a] + n * np.eye(4)[b])))
                                  for n in offs] for m in offs])
                hess[a, b] = hess[b, a] = float(np.einsum("mn,m,n->", vals, w1, w1))
        hess_cov = hess - np.einsum("cab,c->ab", Gam, du)
        lap = float(np.einsum("ab,ab->", G, hess_cov))
        val = -6.0 * lap + data["R"] * float(fieldfn(p))
        return DiffOpResult("conf_laplacian", p, np.asarray(val))

    if op in ("killing", "conf_killing"):
        w, dw, _ = _field_partials(fieldfn, p, h, scheme.nodes)
        nab = dw - np.einsum("cab,c->ab", Gam, w)  # nabla_a w_b
        L = nab + nab.T
        if op == "killing":
            return DiffOpResult("killing", p, L)
        divw = float(np.einsum("ab,ab->", G, nab))
        K = L - 0.5 * divw * g
        return DiffOpResult("conf_killing", p, K)

    if op == "div":
        T, dT, _ = _field_partials(fieldfn, p, h, scheme.nodes)
        if T.ndim == 1:
            nab = dT - np.einsum("cab,c->ab", Gam, T)
            return DiffOpResult("div", p, np.asarray(np.einsum("ab,ab->", G, nab)))
        cd = _cov1(T, dT, Gam)
        return DiffOpResult("div", p, np.einsum("ai,aij->j", G, cd))

    if op == "box":
        def Kfield(q):
            return apply_operator("conf_killing", chart, fieldfn, q, scheme).value
        T, dT, _ = _field_partials(Kfield, p, h, scheme.nodes)
        cd = _cov1(T, dT, Gam)
        return DiffOpResult("box", p, np.einsum("ai,aij->j", G, cd))

    raise ValueError(f"unknown operator {op!r}")


# ---------------------------------------------------------------------------
# the flat-space linearized operator (exact, symbolic)
# ---------------------------------------------------------------------------

def _sym():
    import sympy
    return sympy


def sym_coords():
    sympy = _sym()
    return sympy.symbols("x1 x2 x3 x4", real=True)


def inverse_radius_symbol():
    """The symbol u standing for 1/|x|^2 in exact rational-homogeneous fields."""
    sympy = _sym()
    return sympy.Symbol("u", positive=True)


def _exact_diff(expr, xi, xs, u):
    """d/dxi on polynomials in (x, u) with the relation u = 1/|x|^2."""
    sympy = _sym()
    out = sympy.diff(expr, xi)
    if u is not None:
        out = out - 2 * xi * u ** 2 * sympy.diff(expr, u)
    return sympy.expand(out)


def flat_linearized_s0(h_matrix, t, simplify=True):
    """Flat-space linearization of the gauged gradient, exactly.

    S0 h = Lap^2 h - 2 (t + 5/24) Hess(Lap tr h) - 2 (t + 5/24) Lap(divdiv h) g
           + 2 (t + 5/6) Hess(divdiv h) + 2 (t - 7/96) Lap^2(tr h) g

    ``h_matrix`` is a 4x4 sympy Matrix in the coordinates of ``sym_coords``,
    optionally also polynomial in the symbol of ``inverse_radius_symbol``
    (representing 1/|x|^2, differentiated by the exact chain rule); ``t``
    may be numeric or a sympy symbol.  Returns a sympy Matrix.
    """
    sympy = _sym()
    xs = sym_coords()
    h = sympy.Matrix(h_matrix)
    u = inverse_radius_symbol()
    if not any(u in e.free_symbols for e in h):
        u = None

    def d(expr, xi):
        return _exact_diff(expr, xi, xs, u)

    def lap(expr):
        return sum(d(d(expr, x), x) for x in xs)

    def hess(expr):
        return sympy.Matrix(4, 4, lambda i, j: d(d(expr, xs[i]), xs[j]))

    tr = sum(h[i, i] for i in range(4))
    divdiv = sum(d(d(h[i, j], xs[i]), xs[j]) for i in range(4) for j in range(4))
    lap2h = sympy.Matrix(4, 4, lambda i, j: lap(lap(h[i, j])))
    eye = sympy.eye(4)
    t = sympy.nsimplify(t) if not hasattr(t, "free_symbols") else t
    out = (lap2h
           - 2 * (t + sympy.Rational(5, 24)) * hess(lap(tr))
           - 2 * (t + sympy.Rational(5, 24)) * lap(divdiv) * eye
           + 2 * (t + sympy.Rational(5, 6)) * hess(divdiv)
           + 2 * (t - sympy.Rational(7, 96)) * lap(lap(tr)) * eye)
    if simplify:
        out = out.applyfunc(sympy.expand)
    return out


def _reduce_af(expr):
    """Normalize a polynomial in (x, u) modulo u |x|^2 = 1 to a polynomial in x."""
    sympy = _sym()
    u = inverse_radius_symbol()
    xs = sym_coords()
    q = sum(x ** 2 for x in xs)
    expr = sympy.expand(expr)
    if u not in expr.free_symbols:
        return expr
    poly = sympy.Poly(expr, u)
    deg = poly.degree()
    # multiply by q^deg and substitute u q = 1: u^k q^deg -> q^(deg-k)
    out = sum(coeff * q ** (deg - k)
              for (k,), coeff in poly.terms())
    return sympy.expand(out)


def h2_field(Rm0):
    """Quadratic correction tensor -(1/3) Rm0[i,k,j,l] x^k x^l as sympy Matrix."""
    sympy = _sym()
    xs = sym_coords()
    Rm0 = np.asarray(Rm0)

    def entry(i, j):
        total = 0
        for k in range(4):
            for l in range(4):
                c = Rm0[i, k, j, l]
                if c == 0:
                    continue
                total += sympy.nsimplify(c) * xs[k] * xs[l]
        return -total / 3
    return sympy.Matrix(4, 4, entry)


def hminus2_field(Rm0, A):
    """Inverse-quadratic AF correction tensor as a sympy Matrix.

    -(1/3) Rm0[i,k,j,l] x^k x^l / |x|^4 + 2 A delta_ij / |x|^2,
    written as a polynomial in (x, u) with u the inverse squared radius.
    """
    sympy = _sym()
    u = inverse_radius_symbol()
    H2 = h2_field(Rm0)
    A = sympy.nsimplify(A) if not hasattr(A, "free_symbols") else A
    return sympy.Matrix(4, 4, lambda i, j: H2[i, j] * u ** 2
                        + (2 * A * u if i == j else 0))


def is_zero_matrix(M):
    """Exact vanishing test modulo the relation u |x|^2 = 1."""
    return all(_reduce_af(e) == 0 for e in M)


# ---------------------------------------------------------------------------
# asymptotics and functionals
# ---------------------------------------------------------------------------

def fit_decay_slope(radii, values):
    """Least-squares slope of log|value| against log(radius)."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0
    if keep.sum() < 3:
        raise ValueError("decay fit needs at least 3 positive samples")
    x = np.log(radii[keep])
    y = np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(np.polyval([slope, intercept], x) - y)))
    return float(slope), float(intercept), resid


def ricci_closed_form(x, Rm0, A):
    """Leading AF Ricci expansion of a conformal blow-up chart.

    Ric_ij = -(4/3) W0[i,k,j,l] x^k x^l / |x|^6 - (R0/36) delta / |x|^4
             + (R0/9) x_i x_j / |x|^6 - 16 A x_i x_j / |x|^6
             + 4 A delta / |x|^4 + O(|x|^-5),
    with W0, R0 the Weyl part and scalar curvature of Rm0.
    """
    x = np.asarray(x, dtype=float)
    W0, _, R0, _ = tc.decompose_curvature(np.asarray(Rm0, dtype=float), np.eye(4))
    q = np.sum(x * x, axis=-1)
    xx = x[..., :, None] * x[..., None, :]
    Wxx = np.einsum("ikjl,...k,...l->...ij", W0, x, x)
    eye = np.eye(4)
    return (-(4.0 / 3.0) * Wxx / q[..., None, None] ** 3
            - (R0 / 36.0) * eye / q[..., None, None] ** 2
            + (R0 / 9.0) * xx / q[..., None, None] ** 3
            - 16.0 * A * xx / q[..., None, None] ** 3
            + 4.0 * A * eye / q[..., None, None] ** 2)


def verify_ricci_asymptotics(chart: MetricChart, radii, Rm0, A, n_dirs=6, seed=2,
                             scheme: FDScheme = None):
    """Fit the decay rate of (numerical Ricci - closed form) on an AF chart.

    Returns a report dict with the fitted slope (target: at most -4.5) and
    the leading radial trace coefficient against (R0/12 - 12 A).
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) < 3:
        raise ValueError("need at least 3 radii")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_dirs, 4))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    diffs, traces = [], []
    for Rr in radii:
        worst = 0.0
        tr_coeff = []
        for u in dirs:
            x = Rr * u
            data = curvature_fields(chart, x, scheme)
            diff = data["Ric"] - ricci_closed_form(x, Rm0, A)
            worst = max(worst, float(np.max(np.abs(diff))))
            tr_coeff.append(float(x @ data["Ric"] @ x / Rr) * Rr ** 3)
        diffs.append(worst)
        traces.append(np.mean(tr_coeff))
    slope, intercept, resid = fit_decay_slope(radii, diffs)
    _, _, R0, _ = tc.decompose_curvature(np.asarray(Rm0, dtype=float), np.eye(4))
    expected_trace = R0 / 12.0 - 12.0 * A
    return {
        "radii": radii.tolist(), "max_component_diff": diffs,
        "slope": slope, "fit_residual": resid,
        "trace_coefficient": traces[-1], "expected_trace_coefficient": expected_trace,
        "trace_rel_error": (abs(traces[-1] - expected_trace) / abs(expected_trace)
                            if expected_trace else float("nan")),
    }


def functional_value(chart: MetricChart, t, rel_tol=1e-4, n0=8, max_doublings=4,
                     rho_max=None):
    """Quadratic curvature functional int |W|^2 + t int R^2 by quadrature.

    Assumes a polar-style chart covering the manifold minus a measure-zero
    set (the Fubini-Study ball rho < pi/2 covering CP^2).  Product
    Gauss-Legendre in (rho, eta) and periodic trapezoid in the two angles,
    refined by doubling until the relative change drops below rel_tol.
    """
    if rho_max is None:
        rho_max = np.pi / 2
    prev = None
    report = []
    n = n0
    for _ in range(max_doublings + 1):
        val, vol, w2_int, r2_int = _functional_pass(chart, t, n, rho_max)
        report.append({"n": n, "value": val, "volume": vol})
        if prev is not None and abs(val - prev) <= rel_tol * abs(val):
            return {"value": val, "volume": vol, "W2_integral": w2_int,
                    "R2_integral": r2_int, "t": t, "history": report}
        prev = val
        n *= 2
    raise RuntimeError(f"quadrature did not converge: {report}")


def _functional_pass(chart, t, n, rho_max):
    from numpy.polynomial.legendre import leggauss
    xr, wr = leggauss(n)
    rho = 0.5 * rho_max * (xr + 1.0)
    wrho = 0.5 * rho_max * wr
    xe, we = leggauss(max(n // 2, 4))
    eta = 0.25 * np.pi * (xe + 1.0)
    weta = 0.25 * np.pi * we
    nphi = 4
    phis = 2 * np.pi * np.arange(nphi) / nphi
    wphi = 2 * np.pi / nphi

    RR, EE, P1, P2 = np.meshgrid(rho, eta, phis, phis, indexing="ij")
    pts = np.stack([
        RR * np.cos(EE) * np.cos(P1), RR * np.cos(EE) * np.sin(P1),
        RR * np.sin(EE) * np.cos(P2), RR * np.sin(EE) * np.sin(P2),
    ], axis=-1)
    shape = pts.shape[:-1]
    flat = pts.reshape(-1, 4)
    data = curvature_fields(chart, flat)
    g, ginv, W, R = data["g"], data["ginv"], data["W"], data["R"]
    W2 = np.einsum("nijkl,npqrs,nip,njq,nkr,nls->n", W, W, ginv, ginv, ginv, ginv)
    detg = np.linalg.det(g)
    dens = np.sqrt(np.clip(detg, 0, None))
    # flat measure rho^3 cos(eta) sin(eta) d rho d eta d phi1 d phi2
    euclid = (RR ** 3 * np.cos(EE) * np.sin(EE)).reshape(-1)
    wgrid = (wrho[:, None, None, None] * weta[None, :, None, None]
             * wphi * wphi * np.ones(shape)).reshape(-1)
    w_all = wgrid * euclid * dens
    vol = float(np.sum(w_all))
    w2_int = float(np.sum(w_all * W2))
    r2_int = float(np.sum(w_all * R ** 2))
    return w2_int + t * r2_int, vol, w2_int, r2_int
