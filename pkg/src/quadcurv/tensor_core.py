"""Exact tensor algebra for 4-dimensional Riemannian geometry.

Everything here is pointwise linear algebra on small arrays: symmetric
2-tensors are (4, 4) arrays, algebraic curvature tensors are (4, 4, 4, 4)
arrays stored so that

    Rm[i, j, k, l]  is antisymmetric in (i, j) and in (k, l),
    Rm[i, j, k, l] == Rm[k, l, i, j],
    Rm[i, j, i, j] > 0 on round spheres (sectional-curvature positive).

With this layout the normal-coordinate expansion of a metric reads

    g_ij(z) = delta_ij - (1/3) Rm[i, k, j, l] z^k z^l + O(|z|^4),

and the Ricci tensor is the (0, 2)-trace Ric_jl = g^{ik} Rm[i, j, k, l].

Arrays may hold floats or ``fractions.Fraction`` entries (dtype=object);
the contraction helpers keep exact arithmetic exact, which is how the
critical-parameter table entries -1/3 are produced as true rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

DIM = 4


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def check_sym2(h, tol=1e-12):
    """Validate a symmetric 2-tensor; returns the array unchanged."""
    h = np.asarray(h)
    if h.shape != (DIM, DIM):
        raise ValueError(f"expected shape (4, 4), got {h.shape}")
    if _maxabs(h - h.T) > tol * max(1.0, _maxabs(h)):
        raise ValueError("tensor is not symmetric")
    return h


def check_positive_definite(g):
    g = check_sym2(g)
    if np.asarray(g).dtype == object:
        g = g.astype(float)
    ev = np.linalg.eigvalsh(g)
    if ev.min() <= 0:
        raise ValueError(f"metric is not positive definite (min eigenvalue {ev.min():.3e})")
    return g


def curvature_symmetry_residual(Rm):
    """Max violation of the pair antisymmetries and pair-exchange symmetry."""
    Rm = np.asarray(Rm)
    r1 = _maxabs(Rm + np.swapaxes(Rm, 0, 1))
    r2 = _maxabs(Rm + np.swapaxes(Rm, 2, 3))
    r3 = _maxabs(Rm - np.transpose(Rm, (2, 3, 0, 1)))
    return max(r1, r2, r3)


def bianchi_residual(Rm):
    """Max violation of the first Bianchi identity."""
    Rm = np.asarray(Rm)
    cyc = Rm + np.transpose(Rm, (0, 2, 3, 1)) + np.transpose(Rm, (0, 3, 1, 2))
    return _maxabs(cyc)


def check_alg_curvature(Rm, tol=1e-8):
    Rm = np.asarray(Rm)
    if Rm.shape != (DIM,) * 4:
        raise ValueError(f"expected shape (4, 4, 4, 4), got {Rm.shape}")
    scale = max(1.0, _maxabs(Rm))
    if curvature_symmetry_residual(Rm) > tol * scale:
        raise ValueError("array lacks curvature pair symmetries")
    if bianchi_residual(Rm) > tol * scale:
        raise ValueError("array violates the first Bianchi identity")
    return Rm


def _maxabs(a):
    a = np.asarray(a)
    if a.dtype == object:
        return max((abs(float(x)) for x in a.flat), default=0.0)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------------------------
# basic constructions
# ---------------------------------------------------------------------------

def kulkarni_nomizu(A, B):
    """Kulkarni-Nomizu product of two symmetric 2-tensors.

    (A ^ B)_{ijkl} = A_ik B_jl - A_il B_jk + A_jl B_ik - A_jk B_il
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.dtype == object or B.dtype == object:
        out = np.empty((DIM,) * 4, dtype=object)
        for i, j, k, l in np.ndindex(out.shape):
            out[i, j, k, l] = (A[i, k] * B[j, l] - A[i, l] * B[j, k]
                               + A[j, l] * B[i, k] - A[j, k] * B[i, l])
        return out
    return (np.einsum("ik,jl->ijkl", A, B) - np.einsum("il,jk->ijkl", A, B)
            + np.einsum("jl,ik->ijkl", A, B) - np.einsum("jk,il->ijkl", A, B))


def ricci_contraction(Rm, ginv=None):
    """Ric_jl = g^{ik} Rm[i, j, k, l]; ginv defaults to the identity."""
    Rm = np.asarray(Rm)
    if ginv is None:
        return np.einsum("ijil->jl", Rm) if Rm.dtype != object else _obj_einsum_ric(Rm)
    return np.einsum("ik,ijkl->jl", ginv, Rm)


def _obj_einsum_ric(Rm):
    out = np.empty((DIM, DIM), dtype=object)
    for j in range(DIM):
        for l in range(DIM):
            out[j, l] = sum(Rm[i, j, i, l] for i in range(DIM))
    return out


def decompose_curvature(Rm, g):
    """Split an algebraic curvature tensor into Weyl/Ricci/scalar parts.

    Returns ``(W, Ric, R, S)`` with S = (Ric - (R/6) g) / 2 the Schouten
    tensor, so that Rm = W + kulkarni_nomizu(S, g) and W is totally
    trace-free with respect to g.
    """
    Rm = np.asarray(Rm)
    g = check_sym2(g)
    exact = Rm.dtype == object or np.asarray(g).dtype == object
    if exact:
        gf = np.vectorize(float)(g)
        if _maxabs(gf - np.eye(DIM)) > 1e-14:
            raise ValueError("exact decomposition only supported for g = identity")
        ginv = np.array([[Fraction(1) if i == j else Fraction(0) for j in range(DIM)]
                         for i in range(DIM)], dtype=object)
        Ric = _obj_einsum_ric(Rm)
        R = sum(Ric[i, i] for i in range(DIM))
        half, sixth = Fraction(1, 2), Fraction(1, 6)
        S = half * (Ric - sixth * R * g)
    else:
        check_positive_definite(g)
        ginv = np.linalg.inv(g)
        Ric = ricci_contraction(Rm, ginv)
        R = float(np.einsum("ij,ij->", ginv, Ric))
        S = 0.5 * (Ric - (R / 6.0) * g)
    W = Rm - kulkarni_nomizu(S, g)
    return W, Ric, R, S


def traceless_ricci(Ric, g, ginv=None):
    if ginv is None:
        ginv = np.linalg.inv(g)
    R = np.einsum("ij,ij->", ginv, Ric)
    return Ric - (R / 4.0) * g


def tensor_norm2(T, ginv=None):
    """Squared tensor norm, all slots contracted with g^{-1}."""
    T = np.asarray(T, dtype=float)
    if ginv is None:
        return float(np.sum(T * T))
    idx = "abcdefgh"[: T.ndim]
    jdx = "mnopqrst"[: T.ndim]
    expr = ",".join(f"{i}{j}" for i, j in zip(idx, jdx))
    return float(np.einsum(f"{idx},{jdx},{expr}->", T, T, *([ginv] * T.ndim)))


# ---------------------------------------------------------------------------
# two-form bases and the Weyl tensor as an operator
# ---------------------------------------------------------------------------

def _wedge(a, b, sign_cd, c, d):
    m = np.zeros((DIM, DIM), dtype=int)
    m[a, b], m[b, a] = 1, -1
    m[c, d], m[d, c] = sign_cd, -sign_cd
    return m


def standard_two_forms(orientation=1):
    """The six unit-normalized 2-forms (squared norm 2 each).

    For orientation +1 the first three span the self-dual forms of the
    standard orientation; reversing the orientation is implemented as the
    coordinate flip x1 -> -x1, which exchanges the two triples.
    """
    # theta- carries an overall sign so that both duality triples satisfy the
    # same quaternionic multiplication table under the negated matrix product.
    forms = np.array([
        _wedge(0, 1, +1, 2, 3),    # omega  = e1^e2 + e3^e4
        _wedge(0, 2, -1, 1, 3),    # eta    = e1^e3 - e2^e4
        _wedge(0, 3, +1, 1, 2),    # theta  = e1^e4 + e2^e3
        _wedge(0, 1, -1, 2, 3),    # omega- = e1^e2 - e3^e4
        _wedge(0, 2, +1, 1, 3),    # eta-   = e1^e3 + e2^e4
        -_wedge(0, 3, -1, 1, 2),   # theta- = e2^e3 - e1^e4
    ])
    if orientation == 1:
        return forms
    if orientation == -1:
        F = np.diag([-1, 1, 1, 1])
        return np.array([F @ m @ F for m in forms])
    raise ValueError("orientation must be +1 or -1")


@dataclass
class TwoFormBasis:
    """Six 2-forms spanning Lambda^2 = Lambda^+ + Lambda^-.

    The product used for the quaternionic multiplication table is the
    negated matrix product, matching the convention in which each basis
    form squares to the identity endomorphism.
    """

    forms: np.ndarray  # shape (6, 4, 4)

    @classmethod
    def standard(cls, orientation=1):
        return cls(standard_two_forms(orientation))

    def mul(self, a, b):
        """Product of two basis forms (indices 0..5) as an endomorphism."""
        return -(np.asarray(self.forms[a]) @ np.asarray(self.forms[b]))

    def multiplication_residual(self):
        """Exact check of the quaternionic rules on the self-dual triple.

        Returns the max deviation of {w^2 = Id, wh = t, ht = w, tw = h}
        and of the anti-self-dual analogues.
        """
        res = 0
        for block in (0, 3):
            w, h, t = block, block + 1, block + 2
            ident = np.eye(DIM, dtype=int)
            res = max(res, _maxabs(self.mul(w, w) - ident))
            res = max(res, _maxabs(self.mul(h, h) - ident))
            res = max(res, _maxabs(self.mul(t, t) - ident))
            res = max(res, _maxabs(self.mul(w, h) - self.forms[t]))
            res = max(res, _maxabs(self.mul(h, t) - self.forms[w]))
            res = max(res, _maxabs(self.mul(t, w) - self.forms[h]))
        return res

    def duality_signs(self):
        """+1 / -1 per form under the Hodge star of the standard orientation."""
        signs = []
        for m in self.forms:
            star = hodge_star_2form(m)
            if _maxabs(star - m) < 1e-12 * max(1, _maxabs(m)):
                signs.append(+1)
            elif _maxabs(star + m) < 1e-12 * max(1, _maxabs(m)):
                signs.append(-1)
            else:
                signs.append(0)
        return signs


_EPS4 = np.zeros((DIM,) * 4)
for _perm, _sgn in (
    ((0, 1, 2, 3), 1), ((0, 2, 3, 1), 1), ((0, 3, 1, 2), 1),
    ((1, 0, 3, 2), 1), ((1, 2, 0, 3), 1), ((1, 3, 2, 0), 1),
    ((2, 0, 1, 3), 1), ((2, 1, 3, 0), 1), ((2, 3, 0, 1), 1),
    ((3, 0, 2, 1), 1), ((3, 1, 0, 2), 1), ((3, 2, 1, 0), 1),
    ((0, 1, 3, 2), -1), ((0, 2, 1, 3), -1), ((0, 3, 2, 1), -1),
    ((1, 0, 2, 3), -1), ((1, 2, 3, 0), -1), ((1, 3, 0, 2), -1),
    ((2, 0, 3, 1), -1), ((2, 1, 0, 3), -1), ((2, 3, 1, 0), -1),
    ((3, 0, 1, 2), -1), ((3, 1, 2, 0), -1), ((3, 2, 0, 1), -1),
):
    _EPS4[_perm] = _sgn


def hodge_star_2form(m):
    """Hodge star on 2-forms for the flat metric, standard orientation."""
    return 0.5 * np.einsum("ijkl,kl->ij", _EPS4, np.asarray(m, dtype=float))


@dataclass
class WeylOperator:
    """The Weyl tensor as a trace-free endomorphism of 2-forms."""

    sd_eigenvalues: tuple
    asd_eigenvalues: tuple
    basis: TwoFormBasis
    matrix: np.ndarray = field(repr=False)
    off_block_residual: float = 0.0
    orientation: int = 1

    def reconstruct(self):
        """W = (1/2) sum_p lambda_p B_p (x) B_p over the eigenbasis."""
        lams = list(self.sd_eigenvalues) + list(self.asd_eigenvalues)
        W = np.zeros((DIM,) * 4)
        for lam, B in zip(lams, self.basis.forms):
            W += 0.5 * lam * np.multiply.outer(B, B)
        return W


def weyl_as_operator(W, g=None, orientation=1):
    """Diagonalize a Weyl-type tensor on the self-dual / anti-self-dual blocks.

    The tensor is moved to a g-orthonormal frame, projected onto the
    standard two-form basis (flipped when orientation == -1), and each
    3x3 block is eigen-solved.  The coupling between the blocks is
    reported as ``off_block_residual`` rather than raised, since tensors
    assembled from finite differences carry discretization noise there.
    """
    W = np.asarray(W, dtype=float)
    if g is not None and _maxabs(np.asarray(g, dtype=float) - np.eye(DIM)) > 1e-14:
        g = check_positive_definite(g)
        L = np.linalg.cholesky(g)
        E = np.linalg.inv(L).T  # columns: orthonormal frame vectors
        W = np.einsum("ijkl,ia,jb,kc,ld->abcd", W, E, E, E, E)
    forms = standard_two_forms(orientation)
    M = np.einsum("ijkl,qij,pkl->pq", W, forms.astype(float), forms.astype(float)) / 8.0
    M = 0.5 * (M + M.T)
    off = _maxabs(M[:3, 3:])
    out_forms = np.empty((6, DIM, DIM))
    eigs = []
    for blk in range(2):
        sub = M[3 * blk: 3 * blk + 3, 3 * blk: 3 * blk + 3]
        vals, vecs = np.linalg.eigh(sub)
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]
        if np.linalg.det(vecs) < 0:
            vecs[:, 2] = -vecs[:, 2]
        eigs.append(tuple(vals))
        for p in range(3):
            out_forms[3 * blk + p] = np.einsum(
                "q,qij->ij", vecs[:, p], forms[3 * blk: 3 * blk + 3].astype(float))
    return WeylOperator(
        sd_eigenvalues=eigs[0],
        asd_eigenvalues=eigs[1],
        basis=TwoFormBasis(out_forms),
        matrix=M,
        off_block_residual=off,
        orientation=orientation,
    )


def weyl_from_eigenvalues(sd, asd, orientation=1, exact=False):
    """Build the Weyl-type tensor (1/2) sum lambda_p B_p (x) B_p.

    Each triple must sum to zero.  With ``exact=True`` the eigenvalues are
    taken as Fractions and the result has dtype=object.
    """
    lams = list(sd) + list(asd)
    if exact:
        lams = [Fraction(x) for x in lams]
        for blk in (lams[:3], lams[3:]):
            if sum(blk) != 0:
                raise ValueError("eigenvalue triples must be trace-free")
        forms = standard_two_forms(orientation)
        W = np.zeros((DIM,) * 4, dtype=object)
        W[...] = Fraction(0)
        for lam, B in zip(lams, forms):
            W = W + Fraction(1, 2) * lam * np.multiply.outer(B, B).astype(object)
        return W
    for blk in (lams[:3], lams[3:]):
        if abs(sum(blk)) > 1e-12 * max(1.0, max(abs(x) for x in blk)):
            raise ValueError("eigenvalue triples must be trace-free")
    forms = standard_two_forms(orientation).astype(float)
    return 0.5 * np.einsum("p,pij,pkl->ijkl", np.array(lams, dtype=float), forms, forms)


# ---------------------------------------------------------------------------
# Weyl contractions
# ---------------------------------------------------------------------------

def weyl_inner_contractions(W1, W2):
    """Raw full and index-crossed contractions of two curvature-type tensors.

    full    = sum W1[a,b,c,d] W2[a,b,c,d]
    crossed = sum W1[a,b,c,d] W2[a,d,c,b]   (second and fourth slot swapped)

    For a simultaneously diagonalized pair, crossed equals twice the sum of
    eigenvalue products, which is half of full.
    """
    W1 = np.asarray(W1)
    W2 = np.asarray(W2)
    if W1.dtype == object or W2.dtype == object:
        full = sum(W1[i] * W2[i] for i in np.ndindex(W1.shape))
        crossed = sum(
            W1[a, b, c, d] * W2[a, d, c, b] for a, b, c, d in np.ndindex(W1.shape))
        return full, crossed
    full = float(np.einsum("abcd,abcd->", W1, W2))
    crossed = float(np.einsum("abcd,adcb->", W1, W2))
    return full, crossed


def circ_product(W1, W2):
    """Weyl product entering the leading coefficient of the scaling obstruction.

    Computed as (2/3) * (full + crossed); on simultaneously diagonalized
    pairs this equals the plain full contraction 4 * sum(lambda_p
    lambda~_p), which is the value the published critical-parameter
    tables are built from.
    """
    full, crossed = weyl_inner_contractions(W1, W2)
    if isinstance(full, Fraction) or isinstance(crossed, Fraction):
        return Fraction(2, 3) * (full + crossed)
    return (2.0 / 3.0) * (full + crossed)


# ---------------------------------------------------------------------------
# model curvature tensors of the building blocks
# ---------------------------------------------------------------------------

def space_form_curvature(K=1.0, exact=False):
    """Constant-curvature tensor with all sectional curvatures K."""
    if exact:
        K = Fraction(K)
        delta = np.array([[Fraction(int(i == j)) for j in range(DIM)] for i in range(DIM)],
                         dtype=object)
        return (K / 2) * kulkarni_nomizu(delta, delta)
    return (K / 2.0) * kulkarni_nomizu(np.eye(DIM), np.eye(DIM))


def _set_curv(Rm, i, j, k, l, v):
    for (a, b, c, d), s in (
        ((i, j, k, l), 1), ((j, i, k, l), -1), ((i, j, l, k), -1), ((j, i, l, k), 1),
        ((k, l, i, j), 1), ((l, k, i, j), -1), ((k, l, j, i), -1), ((l, k, j, i), 1),
    ):
        Rm[a, b, c, d] = s * v


def s2xs2_curvature(exact=False):
    """Curvature of the product of two unit-curvature 2-spheres (R = 4).

    Coordinates (z1, z2) span the first factor and (z3, z4) the second.
    """
    one = Fraction(1) if exact else 1.0
    Rm = np.zeros((DIM,) * 4, dtype=object if exact else float)
    if exact:
        Rm[...] = Fraction(0)
    _set_curv(Rm, 0, 1, 0, 1, one)
    _set_curv(Rm, 2, 3, 2, 3, one)
    return Rm


def fs_curvature(exact=False):
    """Curvature tensor of the Fubini-Study metric normalized to Ric = 6 g.

    Built from the self-dual eigenvalues (4, -2, -2) (eigenform: the
    Kaehler form z1^z2 + z3^z4) plus the Einstein space-form part with
    Schouten tensor equal to the identity.
    """
    W = weyl_from_eigenvalues((4, -2, -2), (0, 0, 0), exact=exact)
    if exact:
        delta = np.array([[Fraction(int(i == j)) for j in range(DIM)] for i in range(DIM)],
                         dtype=object)
        return W + kulkarni_nomizu(delta, delta)
    return W + kulkarni_nomizu(np.eye(DIM), np.eye(DIM))


MODEL_CURVATURES = {
    "fs": fs_curvature,
    "s2xs2": s2xs2_curvature,
    "flat": lambda exact=False: space_form_curvature(0 if exact else 0.0, exact=exact),
}


def rotate_curvature(Rm, Q):
    """Pull an algebraic curvature tensor through the frame change Q."""
    return np.einsum("ijkl,ia,jb,kc,ld->abcd", np.asarray(Rm, dtype=float),
                     Q, Q, Q, Q)
