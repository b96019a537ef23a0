"""Bimodule-valued sesquilinear maps as basis tables, and their verifiers.

A ``SesquiForm`` stores Phi on a d-dimensional coordinate space as a
(d, d, *target.shape) coefficient array with ``coeffs[i, j]`` the coordinates
of Phi(a_i, a_j).  The convention throughout is linear in the FIRST argument
and conjugate-linear in the second:

    Phi(x, y) = sum_ij x_i conj(y_j) coeffs[i, j].

Positivity (Phi(x, x) in the cone for every x) is decidable exactly for
targets whose cone is a product of half-lines (the function, measure, kernel
and sequence kinds, and 1 x 1 matrix targets): per output coordinate the d x d
matrix of that coordinate must be PSD.  For matrix and operator-map targets
the exact question is block positivity; only sampled verdicts (plus witness
counterexamples, which are always genuine) are offered.

Inequality sweeps compare a certified lower bound of the left-hand side
against exact right-hand sides, so a reported violation is never a witness
artifact; "pass" means "no counterexample found".  Sampling uses complex
standard Gaussian coordinates with mandatory recorded seeds; per-sweep RNG
streams derive from the seed alone, so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bimodules as bm
from .algebras import QuasiAlgebra
from .bimodules import BimoduleElement, BimoduleSpace, ShapeError


class PositivityError(ValueError):
    """A value that must lie in the positive cone does not."""


@dataclass(frozen=True)
class SesquiForm:
    dim: int
    target: BimoduleSpace
    coeffs: np.ndarray = field(compare=False)  # (d, d, *target.shape)
    algebra: QuasiAlgebra | None = field(default=None, compare=False)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.abs(self.coeffs).max(initial=0.0)))


@dataclass(frozen=True)
class LinearPositiveMap:
    """A positive linear map omega: A -> Y, stored by its basis images."""
    algebra: QuasiAlgebra = field(compare=False)
    target: BimoduleSpace = field(compare=False)
    images: np.ndarray = field(compare=False)  # (d, *target.shape)


def sesqui_form(target: BimoduleSpace, coeffs, algebra: QuasiAlgebra | None = None) -> SesquiForm:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim < 2 or coeffs.shape[0] != coeffs.shape[1] \
            or coeffs.shape[2:] != target.shape:
        raise ShapeError(f"table shape {coeffs.shape} does not match (d, d, {target.shape})")
    if algebra is not None and algebra.dim != coeffs.shape[0]:
        raise ShapeError("algebra dimension does not match the table")
    return SesquiForm(coeffs.shape[0], target, coeffs, algebra)


def induced_form(omega: LinearPositiveMap) -> SesquiForm:
    """The sesquilinear map Phi(a, b) = omega(b* a) of a positive linear map."""
    alg = omega.algebra
    coeffs = np.einsum("kj,kil,l...->ij...", alg.invol, alg.mult, omega.images)
    return sesqui_form(omega.target, coeffs, alg)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def eval_form(phi: SesquiForm, x, y) -> BimoduleElement:
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if x.shape != (phi.dim,) or y.shape != (phi.dim,):
        raise ShapeError("argument dimension mismatch")
    val = np.einsum("i,j,ij...->...", x, np.conj(y), phi.coeffs)
    return BimoduleElement(phi.target, val)


def eval_pairs(phi: SesquiForm, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Batched Phi(x1[b], x2[b]) -> (B, *target.shape)."""
    return np.einsum("bi,bj,ij...->b...", x1, np.conj(x2), phi.coeffs)


def eval_diag(phi: SesquiForm, x: np.ndarray) -> np.ndarray:
    return eval_pairs(phi, x, x)


def hermitian_residual(phi: SesquiForm) -> float:
    adj = bm.adjoint_coords(phi.target, phi.coeffs, batch_ndim=2)
    swapped = np.swapaxes(phi.coeffs, 0, 1)
    return float(np.abs(swapped - adj).max(initial=0.0)) / phi.scale


# ---------------------------------------------------------------------------
# positivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PositivityVerdict:
    status: str  # verified-exact | no-counterexample | counterexample
    witness: object = None
    mode: str = "exact"
    trials: int = 0
    seed: int = 0
    min_eig: float = float("nan")

    @property
    def ok(self) -> bool:
        return self.status != "counterexample"


def exact_positivity_capable(space: BimoduleSpace) -> bool:
    if space.kind in bm.ENTRYWISE_KINDS:
        return True
    return space.kind in bm.MATRIX_KINDS and space.shape == (1, 1)


def check_positive(phi: SesquiForm, mode: str = "exact", trials: int = 10000,
                   tol: float = 1e-10, seed: int = 0) -> PositivityVerdict:
    """Positivity verdict for Phi.

    ``exact`` mode requires a target with scalar output coordinates and is
    complete: for every output coordinate t the matrix [coeffs[i, j, t]]_ij
    must be PSD.  ``sampled`` mode draws random unit vectors and cone-tests
    Phi(x, x); a counterexample carries the violating x.
    """
    s = phi.scale
    if mode == "exact":
        if not exact_positivity_capable(phi.target):
            raise ValueError(f"exact positivity undecidable for kind {phi.target.kind}")
        flat = phi.coeffs.reshape(phi.dim, phi.dim, -1)
        mats = np.moveaxis(flat, 2, 0)
        herm = 0.5 * (mats + np.swapaxes(mats, 1, 2).conj())
        herm_res = float(np.abs(mats - np.swapaxes(mats, 1, 2).conj()).max(initial=0.0))
        w, v = np.linalg.eigh(herm)
        lo = float(w[:, 0].min()) if w.size else 0.0
        if w.size and (lo < -tol * s or herm_res > 10 * tol * s):
            t = int(np.argmin(w[:, 0]))
            x = v[t, :, 0].conj()  # Phi(x, x)(t) = u* M_t u with u = conj(x)
            return PositivityVerdict("counterexample", x, "exact", min_eig=lo)
        return PositivityVerdict("verified-exact", None, "exact", min_eig=lo)
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((trials, phi.dim)) + 1j * rng.standard_normal((trials, phi.dim))
    xs /= np.linalg.norm(xs, axis=1)[:, None]
    vals = eval_diag(phi, xs)
    ok, certain = cone_mask_batch(phi.target, vals, tol, s)
    bad = ~ok
    if bad.any():
        t = int(np.argmax(bad))
        return PositivityVerdict("counterexample", xs[t].copy(), "sampled", trials, seed)
    return PositivityVerdict("no-counterexample", None, "sampled", trials, seed)


def cone_mask_batch(space: BimoduleSpace, vals: np.ndarray, tol: float,
                    scale: float, rank_one_trials: int = 64,
                    seed: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized cone test over a (B, *space.shape) stack.

    Returns (in_cone, certain): ``in_cone[b]`` False implies a genuine
    violation; ``certain[b]`` marks verdicts that are exact rather than
    sampled/sufficient.
    """
    b = len(vals)
    thr = tol * scale
    if space.kind in bm.ENTRYWISE_KINDS:
        flat = vals.reshape(b, -1)
        ok = (flat.real >= -thr).all(axis=1) & (np.abs(flat.imag) <= thr).all(axis=1)
        return ok, np.ones(b, dtype=bool)
    if space.kind in bm.MATRIX_KINDS:
        return _psd_mask(vals, thr), np.ones(b, dtype=bool)
    dom, cod = space.domain, space.codomain
    if dom.kind == "comm":
        ok = np.ones(b, dtype=bool)
        certain = np.ones(b, dtype=bool)
        for r in range(dom.dim):
            o, c = cone_mask_batch(cod, vals[..., r], tol, scale,
                                   rank_one_trials, seed)
            ok &= o
            certain &= c
        return ok, certain
    p = dom.dim
    if cod.kind in ("CGrid", "L2Finite", "MeasuresFinite"):
        mats = vals.reshape(-1, p, p)
        ok = _psd_mask(mats, thr).reshape(b, -1).all(axis=1)
        return ok, np.ones(b, dtype=bool)
    n = cod.shape[0]
    choi = np.transpose(vals, (0, 3, 1, 4, 2)).reshape(b, p * n, p * n)
    choi_ok = _psd_mask(choi, thr)
    ok = choi_ok.copy()
    certain = choi_ok.copy()
    if (~choi_ok).any():
        rng = np.random.default_rng(seed)
        vs = rng.standard_normal((rank_one_trials, p)) + 1j * rng.standard_normal((rank_one_trials, p))
        vs /= np.linalg.norm(vs, axis=1)[:, None]
        sub = vals[~choi_ok]
        imgs = np.einsum("xabrs,tr,ts->xtab", sub, vs, vs.conj())
        bad = ~_psd_mask(imgs.reshape(-1, n, n), thr).reshape(len(sub), rank_one_trials)
        found = bad.any(axis=1)
        ok[~choi_ok] = ~found
        certain[~choi_ok] = found  # certain only when a genuine witness exists
    return ok, certain


def _psd_mask(mats: np.ndarray, thr: float) -> np.ndarray:
    herm_res = np.abs(mats - np.swapaxes(mats, -1, -2).conj()).max(axis=(-1, -2))
    w = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2).conj()))
    return (w[..., 0] >= -thr) & (herm_res <= 10 * thr)


# ---------------------------------------------------------------------------
# left-invariance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeftInvarianceReport:
    residual: float
    tol: float
    passed: bool


def check_left_invariant(phi: SesquiForm, tol: float = 1e-10) -> LeftInvarianceReport:
    """Residual of Phi(a c, d) = Phi(c, a* d) over basis a in A, c, d in A0."""
    if phi.algebra is None:
        raise ValueError("left-invariance needs a quasi-algebra")
    alg = phi.algebra
    mask = np.flatnonzero(np.asarray(alg.a0_mask))
    lhs = np.einsum("iju,uk...->ijk...", alg.mult, phi.coeffs)
    rhs = np.einsum("ui,ukv,jv...->ijk...", np.conj(alg.invol), np.conj(alg.mult),
                    phi.coeffs)
    diff = np.abs(lhs - rhs)[np.ix_(range(alg.dim), mask, mask)]
    residual = float(diff.max(initial=0.0)) / phi.scale
    return LeftInvarianceReport(residual, tol, residual <= tol)


# ---------------------------------------------------------------------------
# null space and the induced norm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NullSpaceResult:
    basis: np.ndarray          # (d, k), orthonormal columns
    singulars: np.ndarray
    rank: int
    degenerate: bool
    diag_residual: float       # max ||Phi(v, v)|| over returned basis vectors
    row_basis: np.ndarray = None  # (rank, d) orthonormal complement rows

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def null_space(phi: SesquiForm, rank_tol: float | None = None) -> NullSpaceResult:
    """Orthonormal basis of N_Phi = {x : Phi(x, y) = 0 for all y}.

    The kernel of the stacked linear map x -> (Phi(x, a_j))_j is computed by
    SVD; the singular spectrum is returned so borderline ranks are auditable.
    """
    d = phi.dim
    flat = phi.coeffs.reshape(d, d, -1)
    stacked = np.moveaxis(flat, 0, -1).reshape(-1, d)  # rows (j, t), cols i
    _, s, vh = np.linalg.svd(stacked)
    smax = s[0] if len(s) else 0.0
    if smax <= 1e-300:
        return NullSpaceResult(np.eye(d, dtype=np.complex128), s, 0, True, 0.0,
                               np.zeros((0, d), dtype=np.complex128))
    if rank_tol is None:
        rank_tol = d * np.finfo(float).eps
    rank = int((s > rank_tol * smax).sum())
    basis = vh[rank:].conj().T
    if basis.shape[1]:
        res = float(np.abs(eval_diag(phi, basis.T)).max())
    else:
        res = 0.0
    return NullSpaceResult(basis, s, rank, False, res, vh[:rank])


def phi_norm(phi: SesquiForm, x, cone_tol: float = 1e-8) -> float:
    """The seminorm sqrt(||Phi(x, x)||); raises if Phi(x, x) leaves the cone."""
    val = eval_form(phi, x, x)
    res = bm.cone_contains(phi.target, val, tol=cone_tol)
    if not res.ok:
        raise PositivityError(f"Phi(x, x) outside the cone ({res.verdict})")
    return float(np.sqrt(bm.norm(phi.target, val, assume_cone=True).value))


# ---------------------------------------------------------------------------
# Cauchy-Schwarz sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsReport:
    trials: int
    seed: int
    tol: float
    n_violations: int
    worst_margin: float      # max of L - (R (1+tol) + tol); <= 0 means pass
    worst_rel: float         # max of (L - R) / max(R, 1e-30)
    witness: object = None
    intermediate_margin: float | None = None
    cone_failures: int = 0

    @property
    def passed(self) -> bool:
        return self.n_violations == 0 and self.cone_failures == 0


def verify_cs(phi: SesquiForm, trials: int = 1000, tol: float = 1e-9,
              seed: int = 0, n_witness: tuple[int, int] = (32, 32),
              n_intermediate: int = 16) -> CsReport:
    """Sampled check of ||Phi(x1, x2)|| <= ||Phi(x1, x1)||^1/2 ||Phi(x2, x2)||^1/2.

    Left sides use exact norms where available and witness lower bounds for
    operator-map targets; right sides always use the exact cone-element norm.
    For operator-map targets the sweep additionally checks the two-multiplier
    pairing inequality

        |<T, Phi(x1, x2)(S)>| <= ||T|| ||S|| tau(Phi(x1,x1)(1))^1/2 tau(Phi(x2,x2)(1))^1/2

    over sampled contractions S (domain) and T (codomain pairing), with tau
    the codomain's faithful positive functional.
    """
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal((trials, phi.dim)) + 1j * rng.standard_normal((trials, phi.dim))
    x2 = rng.standard_normal((trials, phi.dim)) + 1j * rng.standard_normal((trials, phi.dim))
    x1 /= np.linalg.norm(x1, axis=1)[:, None]
    x2 /= np.linalg.norm(x2, axis=1)[:, None]
    return cs_sweep(phi, x1, x2, tol, rng, n_witness, n_intermediate, seed)


def cs_sweep(phi: SesquiForm, x1: np.ndarray, x2: np.ndarray, tol: float,
             rng, n_witness=(32, 32), n_intermediate=16, seed: int = 0) -> CsReport:
    space = phi.target
    off = eval_pairs(phi, x1, x2)
    d1 = eval_diag(phi, x1)
    d2 = eval_diag(phi, x2)

    ok1, _ = cone_mask_batch(space, d1, 1e-8, phi.scale)
    ok2, _ = cone_mask_batch(space, d2, 1e-8, phi.scale)
    cone_ok = ok1 & ok2
    cone_failures = int((~cone_ok).sum())
    witness = None
    if cone_failures:
        t = int(np.argmax(~cone_ok))
        witness = ("cone-failure", x1[t].copy() if not ok1[t] else x2[t].copy())

    witnesses = None
    if space.kind == "OpMap":
        witnesses = bm.opmap_witnesses(space, rng, *n_witness)
    left = bm.norms_batch(space, off, witnesses=witnesses)
    right = np.sqrt(bm.norms_batch(space, d1, assume_cone=True)
                    * bm.norms_batch(space, d2, assume_cone=True))
    margin = left - (right * (1 + tol) + tol)
    margin[~cone_ok] = -np.inf
    viol = margin > 0
    n_viol = int(viol.sum())
    worst = float(margin.max(initial=-np.inf))
    rel = float(((left - right) / np.maximum(right, 1e-30))[cone_ok].max(initial=-np.inf))
    if n_viol and witness is None:
        t = int(np.argmax(margin))
        witness = ("cs-violation", x1[t].copy(), x2[t].copy())

    inter = None
    if space.kind == "OpMap":
        inter = _intermediate_pairing_margin(space, off, d1, d2, rng,
                                             n_intermediate, tol)
    return CsReport(len(x1), seed, tol, n_viol, worst, rel, witness, inter,
                    cone_failures)


def _intermediate_pairing_margin(space, off, d1, d2, rng, n_inter, tol):
    cod = space.codomain
    smpl = bm.opmap_witnesses(space, rng, n_inter, n_inter)  # ||S|| <= 1
    mults = bm.codomain_multipliers(cod, rng, 2 * n_inter)   # ||T|| <= 1
    if space.domain.kind == "vn":
        imgs = np.einsum("b...rs,wrs->bw...", off, smpl)
    else:
        imgs = np.einsum("b...r,wr->bw...", off, smpl)
    b, w = imgs.shape[:2]
    flat = imgs.reshape((b * w,) + cod.shape)
    if cod.kind in bm.MATRIX_KINDS:
        pairs = np.einsum("tij,xji->xt", mults, flat)
    else:
        pairs = np.einsum("tj,xj->xt", mults, flat)
    lhs = np.abs(pairs).reshape(b, w, len(mults)).max(axis=(1, 2))
    unit = bm.domain_unit(space)
    t1 = bm.positive_functional(cod, bm.apply_opmap(space, d1, unit)).real
    t2 = bm.positive_functional(cod, bm.apply_opmap(space, d2, unit)).real
    rhs = np.sqrt(np.maximum(t1, 0.0) * np.maximum(t2, 0.0))
    return float((lhs - (rhs * (1 + tol) + tol)).max(initial=-np.inf))


def verify_ks(omega: LinearPositiveMap, trials: int = 1000, tol: float = 1e-9,
              seed: int = 0) -> CsReport:
    """Kadison-Schwarz-type sweep ||w(b*a)|| <= ||w(a*a)||^1/2 ||w(b*b)||^1/2.

    Requires a unital *-algebra, i.e. A0 = A; delegates to the Cauchy-Schwarz
    sweep of the induced form Phi(a, b) = w(b* a).
    """
    if not all(omega.algebra.a0_mask):
        raise ValueError("Kadison-Schwarz sweep needs A0 = A")
    return verify_cs(induced_form(omega), trials=trials, tol=tol, seed=seed)


@dataclass(frozen=True)
class SeriesReport:
    n_terms: int
    lhs: float
    rhs: float
    margin: float
    partial_sum_margin: float
    passed: bool


def verify_series_cs(phis, xs, xts, tol: float = 1e-9) -> SeriesReport:
    """Truncated series inequality

        ||sum_n Phi_n(x_n, xt_n)|| <= ||sum_n Phi_n(x_n, x_n)||^1/2
                                      ||sum_n Phi_n(xt_n, xt_n)||^1/2

    plus monotonicity of the diagonal partial-sum norms.  Requires an
    order-preserving target norm.
    """
    space = phis[0].target
    if not space.order_preserving:
        raise ValueError("series inequality needs an order-preserving target norm")
    off = np.stack([eval_form(p, x, xt).coords for p, x, xt in zip(phis, xs, xts)])
    dg1 = np.stack([eval_form(p, x, x).coords for p, x in zip(phis, xs)])
    dg2 = np.stack([eval_form(p, xt, xt).coords for p, xt in zip(phis, xts)])
    lhs = float(bm.norms_batch(space, off.sum(axis=0)[None])[0])
    r1 = float(bm.norms_batch(space, dg1.sum(axis=0)[None], assume_cone=True)[0])
    r2 = float(bm.norms_batch(space, dg2.sum(axis=0)[None], assume_cone=True)[0])
    rhs = np.sqrt(r1 * r2)
    margin = lhs - (rhs * (1 + tol) + tol)
    psums = np.cumsum(dg1, axis=0)
    pn = bm.norms_batch(space, psums, assume_cone=True)
    pmargin = float((pn[:-1] - pn[1:] * (1 + tol) - tol).max(initial=-np.inf))
    return SeriesReport(len(phis), lhs, rhs, float(margin),
                        pmargin, margin <= 0 and pmargin <= 0)


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------

def bound_estimate(phi: SesquiForm, trials: int = 2000, seed: int = 0) -> float:
    """Empirical bound sup ||Phi(a, b)|| / (||a|| ||b||): a certified lower
    bound of the true constant, sampled plus coordinate extremes and the unit."""
    if phi.algebra is None:
        raise ValueError("bound estimate needs algebra norms")
    alg = phi.algebra
    d = phi.dim
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    b = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    eye = np.eye(d, dtype=np.complex128)
    ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    a = np.concatenate([a, eye[ii.ravel()], alg.unit_coords[None]])
    b = np.concatenate([b, eye[jj.ravel()], alg.unit_coords[None]])
    na = alg.norms(a)
    nb = alg.norms(b)
    keep = (na > 1e-12) & (nb > 1e-12)
    vals = eval_pairs(phi, a[keep], b[keep])
    nv = bm.norms_batch(phi.target, vals)
    return float((nv / (na[keep] * nb[keep])).max(initial=0.0))
