"""Instance generators: worked kernel/quadrature examples, guaranteed-positive
and guaranteed-CP random instances, dominated pairs, and adversarial
perturbations for falsification-power measurements.

The kernel-based generators realize functional-calculus forms over the
Frobenius-over-operator matrix quasi-algebra: W is a PSD matrix, k(x, t) a
nonnegative kernel on [0, ||W||]^2, and eta_x(W) = k(x, .)(W) through the
Hermitian eigendecomposition, eigenvalues clamped to [0, ||W||] against
floating-point drift.  Grids are uniform with a configurable node count
(default 65); integrals use composite trapezoid weights.

Random instances are cone-valued by construction: entrywise targets get
per-coordinate Gram factors, matrix targets sums of A . A* factors, operator
map targets Kraus/vector sandwiches, always with a small faithfulness boost
so planted kernel dimensions are recovered exactly.  Dominated pairs reuse
one construction with per-piece weights in [0, gamma], which yields the cone
inequality sum Psi <= gamma sum Phi identically.  Everything is a pure
function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bimodules as bm
from .algebras import QuasiAlgebra, make_matrix_algebra
from .bimodules import BimoduleSpace, c_grid, dual_vn, l1_trace, l2_finite, \
    measures_finite
from .forms import LinearPositiveMap, SesquiForm, sesqui_form
from .stinespring import (CPForm, FiberSpace, GammaMap, OperatorTable, PsiMap,
                          cp_form, euclid_fiber, extend_to_tensor,
                          matrix_fiber, tensor_to_cp)

DEFAULT_GRID = 65


# ---------------------------------------------------------------------------
# kernel machinery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelFn:
    """A named nonnegative kernel on [0, ||W||]^2 (JSON-friendly)."""
    name: str = "gaussian"
    scale: float = 1.0

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.name == "gaussian":
            return np.exp(-((x - t) / self.scale) ** 2)
        if self.name == "product":
            return x * t
        if self.name == "constant":
            return np.ones(np.broadcast_shapes(x.shape, t.shape))
        raise ValueError(f"unknown kernel {self.name!r}")

    def descriptor(self):
        return {"name": self.name, "scale": self.scale}


@dataclass(frozen=True)
class KernelSpec:
    w: np.ndarray = field(compare=False)
    kernel: object = KernelFn()
    grid_points: int = DEFAULT_GRID
    weight: float = 1.0      # the trace is weight * tr

    def __post_init__(self):
        w = np.asarray(self.w)
        if np.abs(w - w.conj().T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(w).max(initial=0.0)):
            raise ValueError("W must be Hermitian")
        if np.linalg.eigvalsh(0.5 * (w + w.conj().T))[0] < -1e-12 * max(1.0, np.abs(w).max(initial=1.0)):
            raise ValueError("W must be PSD")
        if self.grid_points < 2:
            raise ValueError("grid needs at least two nodes")

    @property
    def q(self) -> int:
        return self.w.shape[0]

    @property
    def w_norm(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.w + self.w.conj().T))[-1])


def eta_stack(spec: KernelSpec, xs: np.ndarray) -> np.ndarray:
    """eta_x(W) = k(x, .)(W) for each x in xs, via eigendecomposition."""
    w = 0.5 * (np.asarray(spec.w, dtype=np.complex128) + np.asarray(spec.w).conj().T)
    lam, u = np.linalg.eigh(w)
    lam = np.clip(lam, 0.0, max(spec.w_norm, 0.0))
    kv = spec.kernel(xs[:, None], lam[None, :])
    if np.min(kv) < -1e-12:
        raise ValueError("kernel takes negative values on the grid")
    kv = np.maximum(kv, 0.0)
    return np.einsum("ar,gr,br->gab", u, kv, u.conj())


def kernel_grid(spec: KernelSpec) -> np.ndarray:
    return np.linspace(0.0, spec.w_norm, spec.grid_points)


def trapezoid_weights(spec: KernelSpec) -> np.ndarray:
    h = spec.w_norm / (spec.grid_points - 1)
    w = np.full(spec.grid_points, h)
    w[0] = w[-1] = h / 2
    return w


def _basis_matrices(q: int) -> np.ndarray:
    return np.eye(q * q, dtype=np.complex128).reshape(q * q, q, q)


def frobenius_algebra(q: int) -> QuasiAlgebra:
    return make_matrix_algebra(q, "frobenius")


# ---------------------------------------------------------------------------
# kernel-form examples
# ---------------------------------------------------------------------------

def gen_kernel_form(spec: KernelSpec) -> SesquiForm:
    """phi(X, Y)(x) = rho(X eta_x(W) Y*) sampled on the grid, into CGrid.

    Positive (exactly checkable), left-invariant over the
    Frobenius-over-operator algebra by traciality.
    """
    xs = kernel_grid(spec)
    eta = eta_stack(spec, xs)
    e = _basis_matrices(spec.q)
    coeffs = spec.weight * np.einsum("iab,gbc,jac->ijg", e, eta, e.conj())
    target = c_grid(spec.grid_points, 0.0, spec.w_norm)
    return sesqui_form(target, coeffs, frobenius_algebra(spec.q))


def gen_composed_form(spec: KernelSpec, f_values) -> SesquiForm:
    """psi(X, Y) = phi(X, Y) o f for a grid map f: [0, 1] -> [0, ||W||],
    into L2 on the unit-interval grid."""
    f = np.asarray(f_values, dtype=float)
    if f.ndim != 1 or len(f) < 1:
        raise ValueError("f must be a 1-d grid of values")
    if f.min(initial=0.0) < -1e-12 or f.max(initial=0.0) > spec.w_norm * (1 + 1e-12):
        raise ValueError("f leaves [0, ||W||]")
    eta = eta_stack(spec, np.clip(f, 0.0, spec.w_norm))
    e = _basis_matrices(spec.q)
    coeffs = spec.weight * np.einsum("iab,gbc,jac->ijg", e, eta, e.conj())
    target = l2_finite(len(f), grid=np.linspace(0.0, 1.0, len(f)))
    return sesqui_form(target, coeffs, frobenius_algebra(spec.q))


def gen_measure_form(psi: SesquiForm, mu) -> SesquiForm:
    """Atom-wise product d(a, b) = psi(a, b) d mu into MeasuresFinite."""
    mu = np.asarray(mu, dtype=float)
    if psi.target.kind not in ("CGrid", "L2Finite"):
        raise ValueError("measure form needs function-kind values")
    if mu.shape != psi.target.shape:
        raise ValueError("weight length mismatch")
    if mu.min(initial=0.0) < 0:
        raise ValueError("mu must be nonnegative")
    target = measures_finite(len(mu))
    return sesqui_form(target, psi.coeffs * mu, psi.algebra)


# ---------------------------------------------------------------------------
# Gel'fand-Pettis quadrature example
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GPIntegralSpec:
    kernel_spec: KernelSpec
    m0: np.ndarray = field(compare=False)   # F(t) = M(t) M(t)* + eps I,
    m1: np.ndarray = field(compare=False)   # M(t) = m0 + (t / ||W||) m1
    t_mat: np.ndarray = field(compare=False)
    f_eps: float = 0.05

    @property
    def h(self) -> int:
        return self.m0.shape[0]

    def f_stack(self, xs: np.ndarray) -> np.ndarray:
        s = max(self.kernel_spec.w_norm, 1e-30)
        m = self.m0[None] + (xs / s)[:, None, None] * self.m1[None]
        return np.einsum("gab,gcb->gac", m, m.conj()) \
            + self.f_eps * np.eye(self.h)[None]


def gen_gelfand_pettis(spec: GPIntegralSpec, grid_points: int | None = None) -> CPForm:
    """Phi(A, B)(X1, X2) = T* ( integral rho(X2* B* A X1 eta_x(W)) F(x) dx ) T
    by composite trapezoid quadrature; a CP, left-invariant table into the
    trace-norm space of the F-matrices."""
    ks = spec.kernel_spec if grid_points is None else KernelSpec(
        spec.kernel_spec.w, spec.kernel_spec.kernel, grid_points,
        spec.kernel_spec.weight)
    xs = kernel_grid(ks)
    wq = trapezoid_weights(ks)
    eta = eta_stack(ks, xs)
    fs = spec.f_stack(xs)
    q = ks.q
    e = _basis_matrices(q)
    scal = ks.weight * np.einsum("lba,jcb,icd,kde,gea->ijklg",
                                 e.conj(), e.conj(), e, e, eta, optimize=True)
    integ = np.einsum("ijklg,g,gab->ijklab", scal, wq, fs, optimize=True)
    t = np.asarray(spec.t_mat, dtype=np.complex128)
    coeffs = np.einsum("ac,ijklab,bd->ijklcd", t.conj(), integ, t)
    eta_f = np.linalg.norm(eta.reshape(len(xs), -1), axis=1)
    f_tr = np.linalg.svd(fs, compute_uv=False).sum(axis=1)
    t_op = float(np.linalg.svd(t, compute_uv=False)[0])
    bound = ks.weight * t_op ** 2 * float((wq * eta_f * f_tr).sum())
    return cp_form(matrix_fiber(q), l1_trace(spec.h), coeffs,
                   frobenius_algebra(q), bound=bound,
                   meta={"instance": "gelfand-pettis", "grid_points": ks.grid_points})


def standard_kernel_spec(q: int = 2, grid_points: int = DEFAULT_GRID,
                         seed: int = 3) -> KernelSpec:
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((q, q)) + 1j * rng.standard_normal((q, q))
    w = g @ g.conj().T / q + 0.2 * np.eye(q)
    spec = KernelSpec(w, KernelFn("gaussian", 1.0), grid_points)
    # gentle kernel scale relative to the spectral interval keeps |f''| small
    return KernelSpec(w, KernelFn("gaussian", max(spec.w_norm, 1.0)), grid_points)


def standard_gp_spec(q: int = 2, h: int = 2, grid_points: int = DEFAULT_GRID,
                     seed: int = 5) -> GPIntegralSpec:
    rng = np.random.default_rng(seed)
    ks = standard_kernel_spec(q, grid_points, seed)
    m0 = rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h))
    m1 = 0.5 * (rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h)))
    t = rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h))
    return GPIntegralSpec(ks, m0, m1, t / np.linalg.norm(t))


# ---------------------------------------------------------------------------
# relative-CP examples
# ---------------------------------------------------------------------------

def gen_gamma_example(spec: KernelSpec, variant: str = "cgrid",
                      seed: int = 11) -> tuple[OperatorTable, GammaMap]:
    """(phi(A, B)(T))(x) = rho(A eta_x(W) T eta_x(W) B*) and its dual / L1
    variants, with Gamma(T1, T2) = T1 T2*."""
    xs = kernel_grid(spec)
    eta = eta_stack(spec, xs)
    q = spec.q
    e = _basis_matrices(q)
    eta_op = np.linalg.svd(eta, compute_uv=False)[:, 0]
    alg = frobenius_algebra(q)
    if variant == "cgrid":
        coeffs = spec.weight * np.einsum("iab,gbr,gsc,jac->ijgrs",
                                         e, eta, eta, e.conj(), optimize=True)
        out = c_grid(spec.grid_points, 0.0, spec.w_norm)
        bound = spec.weight * float(eta_op.max()) ** 2
        table = OperatorTable(alg, matrix_fiber(q), out, coeffs,
                              {"instance": "gamma-cgrid", "bound": bound})
        return table, GammaMap()
    if variant not in ("dual", "l1"):
        raise ValueError(f"unknown variant {variant!r}")
    rng = np.random.default_rng(seed)
    qt = q
    g = rng.standard_normal((qt, qt)) + 1j * rng.standard_normal((qt, qt))
    wt = g @ g.conj().T
    wt *= spec.w_norm / max(np.linalg.eigvalsh(wt)[-1], 1e-30)  # ||Wt|| = ||W||
    lam_t, u_t = np.linalg.eigh(wt)
    lam_t = np.clip(lam_t, 0.0, spec.w_norm)
    eta_t = eta_stack(spec, lam_t)  # eta at the eigenvalues of Wt
    gvals = spec.weight * np.einsum("iab,ubr,usc,jac->ijurs",
                                    e, eta_t, eta_t, e.conj(), optimize=True)
    dens = np.einsum("au,ijurs,bu->ijabrs", u_t, gvals, u_t.conj(), optimize=True)
    eta_t_op = np.linalg.svd(eta_t, compute_uv=False)[:, 0]
    base_bound = spec.weight * qt * float(eta_t_op.max()) ** 2
    if variant == "dual":
        out = dual_vn(qt)
        table = OperatorTable(alg, matrix_fiber(q), out, dens,
                              {"instance": "gamma-dual", "bound": base_bound})
        return table, GammaMap()
    gs = rng.standard_normal((qt, qt)) + 1j * rng.standard_normal((qt, qt))
    gs /= np.linalg.svd(gs, compute_uv=False)[0]
    sand = np.einsum("ca,ijabrs,db->ijcdrs", gs, dens, gs.conj(), optimize=True)
    out = l1_trace(qt)
    table = OperatorTable(alg, matrix_fiber(q), out, sand,
                          {"instance": "gamma-l1", "bound": base_bound})
    return table, GammaMap()


def gen_psi_example(w: np.ndarray) -> tuple[OperatorTable, PsiMap]:
    """Phi(A, B)(X) = W* B* A W X with the pairing Psi(Z, X) = X* Z into the
    trace-norm space; ||Psi|| = 1 with the norming property."""
    w = np.asarray(w, dtype=np.complex128)
    q = w.shape[0]
    e = _basis_matrices(q)
    mats = np.einsum("ca,jbc,ibd,de->ijae", w.conj(), e.conj(), e, w,
                     optimize=True)  # M_ij = W* E_j* E_i W, axes (i,j,a,e)
    eye = np.eye(q)
    coeffs = np.einsum("ijar,bs->ijabrs", mats, eye)  # L(E_rs)[a,b] = M[a,r] d_bs
    alg = frobenius_algebra(q)
    m_ee = w.conj().T @ w
    ee_opnorm = float(np.linalg.svd(m_ee, compute_uv=False).sum())
    w_op = float(np.linalg.svd(w, compute_uv=False)[0]) if w.size else 0.0
    table = OperatorTable(alg, matrix_fiber(q), l1_trace(q), coeffs,
                          {"instance": "psi-leftmul", "bound": w_op ** 2,
                           "ee_opnorm": ee_opnorm})
    return table, PsiMap(target=l1_trace(q))


# ---------------------------------------------------------------------------
# random positive / CP instances
# ---------------------------------------------------------------------------

def random_positive(seed: int, d: int, target: BimoduleSpace,
                    kernel_dim: int = 0, rank: int | None = None,
                    boost: float = 0.05) -> SesquiForm:
    """A positive form on C^d with an exactly planted kernel dimension.

    A faithful core on d - kernel_dim coordinates (cone-valued Gram recipes
    plus a ``boost`` multiple of a strictly positive diagonal) is pulled back
    through a random isometry; the null space is the orthogonal complement of
    its range.
    """
    if not 0 <= kernel_dim <= d:
        raise ValueError("kernel_dim out of range")
    rng = np.random.default_rng(seed)
    dc = d - kernel_dim
    if dc == 0:
        return sesqui_form(target, np.zeros((d, d) + target.shape))
    core = _core_positive(rng, dc, target, rank or dc + 1, boost)
    if kernel_dim == 0:
        return sesqui_form(target, core)
    g = rng.standard_normal((d, dc)) + 1j * rng.standard_normal((d, dc))
    qmat, _ = np.linalg.qr(g)
    coeffs = np.einsum("up,vq,pq...->uv...", qmat.conj(), qmat, core)
    return sesqui_form(target, coeffs)


def _core_positive(rng, d, target, rank, boost):
    kind = target.kind
    if kind in bm.ENTRYWISE_KINDS:
        c = int(np.prod(target.shape))
        b = rng.standard_normal((c, rank, d)) + 1j * rng.standard_normal((c, rank, d))
        flat = np.einsum("cri,crj->ijc", b, b.conj()) / rank
        flat += boost * np.eye(d)[:, :, None]
        return flat.reshape((d, d) + target.shape)
    if kind in bm.MATRIX_KINDS:
        n = target.shape[0]
        a = rng.standard_normal((rank, d, n, n)) + 1j * rng.standard_normal((rank, d, n, n))
        out = np.einsum("ripq,rjsq->ijps", a, a.conj()) / rank
        return out + boost * np.einsum("ij,ps->ijps", np.eye(d), np.eye(n))
    dom, cod = target.domain, target.codomain
    p = dom.dim if dom.kind == "vn" else None
    if dom.kind == "comm":
        cols = np.stack([_core_positive(rng, d, cod, rank, boost)
                         for _ in range(dom.dim)], axis=-1)
        return cols
    if cod.kind in bm.MATRIX_KINDS:
        n = cod.shape[0]
        c = rng.standard_normal((rank, d, n, p)) + 1j * rng.standard_normal((rank, d, n, p))
        out = np.einsum("qiar,qjbs->ijabrs", c, c.conj()) / rank
        out += boost * np.einsum("ij,ab,rs->ijabrs", np.eye(d), np.eye(n), np.eye(p))
        return out
    cshape = cod.shape
    u = rng.standard_normal((rank, d) + cshape + (p,)) \
        + 1j * rng.standard_normal((rank, d) + cshape + (p,))
    out = np.einsum("qi...r,qj...s->ij...rs", u.conj(), u) / rank
    eyep = np.eye(p)
    out += boost * np.einsum("ij,rs->ijrs", np.eye(d), eyep).reshape(
        (d, d) + (1,) * len(cshape) + (p, p))
    return out


def _theta_apply(rng, s_tab, target, n_pieces, boost, weights, extra_axes):
    """Apply a positive map Theta: M_s -> target to a table of s x s Gram
    blocks, as a weighted sum of sandwich pieces plus a faithful trace piece.

    s_tab axes: (d, d, *extra, s, s); weights length n_pieces + 1, the last
    entry scaling the boost piece.
    """
    s = s_tab.shape[-1]
    tr = np.einsum("...uu->...", s_tab)
    kind = target.kind
    w_main, w_boost = weights[:-1], weights[-1]
    ex = "".join(chr(ord("w") + k) for k in range(extra_axes))
    if kind in bm.ENTRYWISE_KINDS:
        u = rng.standard_normal((n_pieces,) + target.shape + (s,)) \
            + 1j * rng.standard_normal((n_pieces,) + target.shape + (s,))
        cc = "".join(chr(ord("c") + k) for k in range(len(target.shape)))
        out = np.einsum(f"q,q{cc}u,ij{ex}uv,q{cc}v->ij{ex}{cc}", w_main,
                        u.conj(), s_tab, u, optimize=True)
        out += w_boost * boost * tr[(...,) + (None,) * len(target.shape)] \
            * np.ones(target.shape)
        return out
    if kind in bm.MATRIX_KINDS:
        n = target.shape[0]
        c = rng.standard_normal((n_pieces, n, s)) + 1j * rng.standard_normal((n_pieces, n, s))
        out = np.einsum(f"q,qau,ij{ex}uv,qbv->ij{ex}ab", w_main, c, s_tab,
                        c.conj(), optimize=True)
        out += w_boost * boost * np.einsum(f"ij{ex},ab->ij{ex}ab", tr, np.eye(n))
        return out
    dom, cod = target.domain, target.codomain
    p = dom.dim
    if cod.kind in bm.MATRIX_KINDS:
        n = cod.shape[0]
        c = rng.standard_normal((n_pieces, n, s, p)) \
            + 1j * rng.standard_normal((n_pieces, n, s, p))
        out = np.einsum(f"q,qaur,ij{ex}uv,qbvs->ij{ex}abrs", w_main, c, s_tab,
                        c.conj(), optimize=True)
        out += w_boost * boost * np.einsum(f"ij{ex},ab,rs->ij{ex}abrs", tr,
                                           np.eye(n), np.eye(p))
        return out
    cshape = cod.shape
    u = rng.standard_normal((n_pieces,) + cshape + (s, p)) \
        + 1j * rng.standard_normal((n_pieces,) + cshape + (s, p))
    cc = "".join(chr(ord("c") + k) for k in range(len(cshape)))
    out = np.einsum(f"q,q{cc}ur,ij{ex}uv,q{cc}vs->ij{ex}{cc}rs", w_main,
                    u.conj(), s_tab, u, optimize=True)
    boost_term = np.einsum(f"ij{ex},rs->ij{ex}rs", tr, np.eye(p))
    out += w_boost * boost * boost_term.reshape(
        boost_term.shape[:2 + extra_axes] + (1,) * len(cshape) + (p, p))
    return out


def random_left_invariant_form(seed: int, algebra: QuasiAlgebra,
                               target: BimoduleSpace, carrier_cols: int | None = None,
                               n_pieces: int = 3, boost: float = 0.05,
                               weights: np.ndarray | None = None) -> SesquiForm:
    """A left-invariant positive form over a matrix quasi-algebra, built from
    the left regular action on a random carrier and a positive map Theta."""
    p = algebra.matrix_dim
    if p is None:
        raise ValueError("needs a matrix quasi-algebra")
    rng = np.random.default_rng(seed)
    s = carrier_cols or p + 1
    v = rng.standard_normal((p, s)) + 1j * rng.standard_normal((p, s))
    e = _basis_matrices(p)
    a = np.einsum("iab,bs->ias", e, v)
    s_tab = np.einsum("jpu,ipv->ijuv", a.conj(), a)
    if weights is None:
        weights = np.ones(n_pieces + 1)
    coeffs = _theta_apply(rng, s_tab, target, n_pieces, boost,
                          np.asarray(weights, dtype=float), 0)
    return sesqui_form(target, coeffs, algebra)


def random_cp(seed: int, d: int, m: int, target: BimoduleSpace,
              carrier_cols: int | None = None, n_pieces: int = 3,
              boost: float = 0.05, weights: np.ndarray | None = None) -> CPForm:
    """A bounded, left-invariant, completely positive table over the
    Frobenius-over-operator matrix algebra of dimension d = p^2, with fiber
    C^m, from a representation-style factorization; carries a safe declared
    bound.

    ``weights`` (length n_pieces + 1, entries in [0, gamma]) rescale the
    cone pieces; two calls with the same seed and different weights give an
    exactly dominated pair.
    """
    p = int(round(np.sqrt(d)))
    if p * p != d:
        raise ValueError("random_cp needs d = p^2 for a matrix algebra")
    alg = frobenius_algebra(p)
    rng = np.random.default_rng(seed)
    s = carrier_cols or p + 1
    v = rng.standard_normal((m, p, s)) + 1j * rng.standard_normal((m, p, s))
    e = _basis_matrices(p)
    a = np.einsum("iab,kbs->ikas", e, v)
    s_tab = np.einsum("jlpu,ikpv->ijkluv", a.conj(), a, optimize=True)
    if weights is None:
        weights = np.ones(n_pieces + 1)
    coeffs = _theta_apply(rng, s_tab, target, n_pieces, boost,
                          np.asarray(weights, dtype=float), 2)
    max_entry = max(bm.coord_norm_bound(target, coeffs[i, j, k, l])
                    for i in range(d) for j in range(d)
                    for k in range(m) for l in range(m))
    bound = max_entry * d * m
    return cp_form(euclid_fiber(m), target, coeffs, alg, bound=bound,
                   meta={"instance": "random-cp", "seed": seed,
                         "carrier_cols": s})


def random_positive_linear_map(seed: int, algebra: QuasiAlgebra,
                               target: BimoduleSpace, rank: int = 3) -> LinearPositiveMap:
    """A positive linear map on a matrix algebra: w(a) = sum_r V_r a V_r*
    realized in the target's cone."""
    p = algebra.matrix_dim
    if p is None:
        raise ValueError("needs a matrix algebra")
    rng = np.random.default_rng(seed)
    e = _basis_matrices(p)
    if target.kind in bm.MATRIX_KINDS:
        n = target.shape[0]
        v = rng.standard_normal((rank, n, p)) + 1j * rng.standard_normal((rank, n, p))
        images = np.einsum("qap,upr,qbr->uab", v, e, v.conj())
    elif target.kind in bm.ENTRYWISE_KINDS:
        u = rng.standard_normal((rank,) + target.shape + (p,)) \
            + 1j * rng.standard_normal((rank,) + target.shape + (p,))
        images = np.einsum("q...a,uab,q...b->u...", u.conj(), e, u)
    else:
        raise ValueError("operator-map targets not supported here")
    return LinearPositiveMap(algebra, target, images)


def dominated_cp_pair(seed: int, d: int, m: int, target: BimoduleSpace,
                      gamma: float = 1.0, n_pieces: int = 3) -> tuple[CPForm, CPForm]:
    """(Phi, Psi) with sum Psi <= gamma sum Phi in the cone order, exactly:
    Psi reweights the cone pieces of Phi by factors in [0, gamma]."""
    rng = np.random.default_rng(seed)
    w = gamma * rng.uniform(0.1, 1.0, n_pieces + 1)
    phi = random_cp(seed, d, m, target, n_pieces=n_pieces)
    psi = random_cp(seed, d, m, target, n_pieces=n_pieces, weights=w)
    return phi, psi


def dominated_form_pair(seed: int, algebra: QuasiAlgebra, target: BimoduleSpace,
                        gamma: float = 1.0, n_pieces: int = 3
                        ) -> tuple[SesquiForm, SesquiForm]:
    rng = np.random.default_rng(seed)
    w = gamma * rng.uniform(0.1, 1.0, n_pieces + 1)
    phi = random_left_invariant_form(seed, algebra, target, n_pieces=n_pieces)
    psi = random_left_invariant_form(seed, algebra, target, n_pieces=n_pieces,
                                     weights=w)
    return phi, psi


def scale_cp(cp: CPForm, c: float) -> CPForm:
    return cp_form(cp.fiber, cp.target, c * cp.coeffs, cp.algebra,
                   bound=None if cp.bound is None else c * cp.bound,
                   meta=dict(cp.meta))


# ---------------------------------------------------------------------------
# adversarial perturbations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationMeta:
    index: tuple
    eps: float
    margin: float
    cone_coords: np.ndarray = field(compare=False)


def diagonal_margin(target: BimoduleSpace, entry: np.ndarray, k: np.ndarray,
                    hi: float = 1.0, iters: int = 60) -> float:
    """sup { eps >= 0 : entry - eps k stays in the cone }, by bisection."""
    if not bm.cone_contains(target, entry, tol=1e-9).ok:
        return 0.0
    while bm.cone_contains(target, entry - hi * k, tol=1e-12).ok:
        hi *= 2
        if hi > 1e12:
            return float("inf")
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if bm.cone_contains(target, entry - mid * k, tol=1e-12).ok:
            lo = mid
        else:
            hi = mid
    return lo


def perturb_noncp(inst, eps: float, seed: int = 0):
    """Subtract eps times a cone element from one diagonal table entry.

    Returns (perturbed instance, PerturbationMeta); positivity fails once eps
    exceeds the reported spectral margin of the chosen diagonal slice.
    Accepts a SesquiForm or a CPForm (where the diagonal entry is a tensor
    diagonal (i, i, k, k)).
    """
    rng = np.random.default_rng(seed)
    k = bm.random_cone_element(inst.target, rng).coords
    scale = max(1e-12, float(np.abs(k).max()))
    k = k / scale
    if isinstance(inst, CPForm):
        i = int(rng.integers(inst.dim))
        kk = int(rng.integers(inst.fiber.dim))
        entry = inst.coeffs[i, i, kk, kk]
        margin = diagonal_margin(inst.target, entry, k)
        coeffs = inst.coeffs.copy()
        coeffs[i, i, kk, kk] = entry - eps * k
        out = cp_form(inst.fiber, inst.target, coeffs, inst.algebra,
                      bound=inst.bound, meta=dict(inst.meta))
        return out, PerturbationMeta((i, kk), eps, margin, k)
    i = int(rng.integers(inst.dim))
    entry = inst.coeffs[i, i]
    margin = diagonal_margin(inst.target, entry, k)
    coeffs = inst.coeffs.copy()
    coeffs[i, i] = entry - eps * k
    out = sesqui_form(inst.target, coeffs, inst.algebra)
    return out, PerturbationMeta((i,), eps, margin, k)
