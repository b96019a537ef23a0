"""Quotient construction and the induced cyclic representation.

Given a positive, left-invariant form Phi over a unital quasi *-algebra, the
coordinate space is quotiented by the null space N_Phi.  The quotient carries
two layers of structure:

* a bookkeeping Euclidean coordinate system: ``lam`` is an (r, d) matrix with
  orthonormal rows (right singular vectors of the stacked form) whose kernel
  is exactly N_Phi;
* the actual bimodule-valued inner product, held in the ``gram`` table:
  gram[p, q] = Phi(v_p, v_q) for the canonical section v_p = lam^H e_p, so
  that Phi(x, y) = sum_pq (lam x)_p conj((lam y))_q gram[p, q].

The representation acts by pi(a) lam(c) = lam(a c) on the image of the A0
mask and is extended by that span (the finite-dimensional reading of the
density requirement).  Left-invariance guarantees well-definedness in exact
arithmetic; the well-definedness residual is computed and reported anyway.
Closedness and the domain/completion distinction are vacuous at finite
dimension and only noted in report metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bimodules as bm
from .algebras import QuasiAlgebra
from .bimodules import BimoduleElement, BimoduleSpace
from .forms import SesquiForm, LinearPositiveMap, check_left_invariant, \
    induced_form, null_space


class SpanError(ValueError):
    """The A0 image does not span the quotient (density condition fails)."""


@dataclass(frozen=True)
class QuotientSpace:
    ambient_dim: int
    rank: int
    lam: np.ndarray = field(compare=False)      # (r, D), orthonormal rows
    gram: np.ndarray = field(compare=False)     # (r, r, *target.shape)
    target: BimoduleSpace = field(compare=False)
    kernel: np.ndarray = field(compare=False)   # (D, D - r), orthonormal columns
    singulars: np.ndarray = field(compare=False)
    degenerate: bool = False


def build_quotient(phi: SesquiForm, rank_tol: float | None = None,
                   ambient_unitary: np.ndarray | None = None) -> QuotientSpace:
    """Quotient of the coordinate space by N_Phi with Y-valued Gram data.

    ``ambient_unitary`` runs the SVD pipeline in rotated coordinates and
    composes the row map back; the result is a different (but equally valid)
    orthonormal section of the same quotient.
    """
    coeffs = phi.coeffs
    if ambient_unitary is not None:
        r_mat = np.asarray(ambient_unitary, dtype=np.complex128)
        coeffs = np.einsum("up,vq,uv...->pq...", r_mat, np.conj(r_mat), coeffs)
    rotated = SesquiForm(phi.dim, phi.target, coeffs, phi.algebra)
    ns = null_space(rotated, rank_tol)
    r = ns.rank
    lam = ns.row_basis
    kernel = ns.basis
    if ambient_unitary is not None:
        lam = lam @ r_mat.conj().T
        kernel = r_mat @ kernel
    section = lam.conj().T  # columns v_p
    gram = np.einsum("ip,jq,ij...->pq...", section, np.conj(section), phi.coeffs)
    return QuotientSpace(phi.dim, r, lam, gram, phi.target, kernel,
                         ns.singulars, ns.degenerate or r == 0)


def gram_ip(q: QuotientSpace, u: np.ndarray, v: np.ndarray) -> BimoduleElement:
    """The Y-valued inner product of quotient coordinate vectors (linear in u)."""
    val = np.einsum("p,q,pq...->...", u, np.conj(v), q.gram)
    return BimoduleElement(q.target, val)


def gram_ip_batch(q: QuotientSpace, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.einsum("bp,bq,pq...->b...", u, np.conj(v), q.gram)


def quotient_norms(q: QuotientSpace, u: np.ndarray) -> np.ndarray:
    """Batched induced norms sqrt(||<u, u>||_Y) over rows of u."""
    vals = gram_ip_batch(q, u, u)
    return np.sqrt(np.maximum(bm.norms_batch(q.target, vals, assume_cone=True), 0.0))


def reconstruction_residual(q: QuotientSpace, phi: SesquiForm) -> float:
    recon = np.einsum("pu,qv,pq...->uv...", q.lam, np.conj(q.lam), q.gram)
    return float(np.abs(recon - phi.coeffs).max(initial=0.0)) / phi.scale


@dataclass(frozen=True)
class GnsRep:
    quotient: QuotientSpace
    rep: np.ndarray = field(compare=False)      # (d, r, r)
    cyclic: np.ndarray = field(compare=False)   # (r,)
    algebra: QuasiAlgebra = field(compare=False)
    welldef_residual: float = 0.0
    notes: tuple = ("finite-dimensional: D_Phi = K_Phi",)

    @property
    def rank(self) -> int:
        return self.quotient.rank


def build_gns(phi: SesquiForm, rank_tol: float | None = None,
              tol: float = 1e-8,
              ambient_unitary: np.ndarray | None = None) -> GnsRep:
    """GNS data (quotient, pi, cyclic vector) of a left-invariant positive form."""
    alg = phi.algebra
    if alg is None:
        raise ValueError("GNS construction needs a quasi-algebra")
    li = check_left_invariant(phi, tol)
    if not li.passed:
        raise ValueError(f"left-invariance violated: residual {li.residual:.3e}")
    q = build_quotient(phi, rank_tol, ambient_unitary)
    l_all = np.transpose(alg.mult, (0, 2, 1))  # l_all[i] @ c = coords(a_i c)
    rep, welldef = _extend_rep(q, alg, l_all, tol)
    cyclic = q.lam @ alg.unit_coords
    return GnsRep(q, rep, cyclic, alg, welldef)


def _extend_rep(q: QuotientSpace, alg: QuasiAlgebra, l_all: np.ndarray,
                tol: float, span_cols: np.ndarray | None = None):
    """pi(a_i) from pi(a) lam(c) = lam(a c) on the masked span, by pseudoinverse."""
    r = q.rank
    if r == 0:
        return np.zeros((l_all.shape[0], 0, 0), dtype=np.complex128), 0.0
    if span_cols is None:
        span_cols = alg.a0_basis()
    s0 = q.lam @ span_cols
    sing = np.linalg.svd(s0, compute_uv=False)
    if len(sing) < r or sing[min(r, len(sing)) - 1] <= max(s0.shape) * np.finfo(float).eps * sing[0] * 10:
        raise SpanError("A0 span does not cover the quotient")
    proj = np.linalg.pinv(s0)
    rep = np.einsum("rk,ikj,js->irs", q.lam, l_all, span_cols @ proj)
    welldef = 0.0
    k0 = _kernel_in_span(q.kernel, span_cols)
    if k0.shape[1]:
        welldef = float(max(np.abs(q.lam @ (l_all[i] @ k0)).max(initial=0.0)
                            for i in range(l_all.shape[0])))
    return rep, welldef


def _kernel_in_span(kernel: np.ndarray, span_cols: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker(Phi) intersected with the span of span_cols."""
    if kernel.shape[1] == 0:
        return kernel
    d = kernel.shape[0]
    proj = span_cols @ np.linalg.pinv(span_cols)
    off = (np.eye(d) - proj) @ kernel
    _, s, vh = np.linalg.svd(off) if off.size else (None, np.zeros(0), np.zeros((0, kernel.shape[1])))
    rank = int((s > (s[0] if len(s) else 0) * d * np.finfo(float).eps).sum()) if len(s) else 0
    coeff = vh[rank:].conj().T
    inside = kernel @ coeff
    if inside.shape[1] == 0:
        return inside
    qmat, _ = np.linalg.qr(inside)
    return qmat


def rep_of(rep: GnsRep, coords: np.ndarray) -> np.ndarray:
    """pi(a) as an r x r matrix, for a with the given coordinates."""
    return np.einsum("i,irs->rs", np.asarray(coords, dtype=np.complex128), rep.rep)


@dataclass(frozen=True)
class GnsReport:
    clauses: dict
    trials: int
    seed: int
    tol: float
    passed: bool
    cyclic_rank: int = 0


def verify_gns(rep: GnsRep, phi: SesquiForm, trials: int = 200,
               tol: float = 1e-8, seed: int = 0) -> GnsReport:
    """Check every clause of the representation statement.

    (i) the adjoint relation <pi(a) xi, eta> = <xi, pi(a*) eta> on samples,
    (ii) pi(a c) = pi(a) pi(c) for c in the A0 mask, (iii) cyclicity of
    lam(e), (iv) the factorization Phi(a_i, a_j) = <pi(a_i) xi, pi(a_j) xi>,
    (v) pi(e) = identity.  Residuals are relative to the size of Phi.
    """
    alg, q = rep.algebra, rep.quotient
    d, r = alg.dim, q.rank
    scale = phi.scale
    clauses = {}
    pis = rep.rep
    if r == 0:
        clauses = {k: 0.0 for k in ("adjoint", "homomorphism", "factorization",
                                    "unit", "welldef")}
        return GnsReport(clauses, trials, seed, tol, True, 0)

    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((trials, r)) + 1j * rng.standard_normal((trials, r))
    eta = rng.standard_normal((trials, r)) + 1j * rng.standard_normal((trials, r))
    xi /= np.linalg.norm(xi, axis=1)[:, None]
    eta /= np.linalg.norm(eta, axis=1)[:, None]
    star_rep = np.einsum("ki,krs->irs", alg.invol, pis)
    lhs = np.einsum("irs,bs,bq,rq...->ib...", pis, xi, np.conj(eta), q.gram)
    rhs = np.einsum("bp,irs,bs,pr...->ib...", xi, np.conj(star_rep), np.conj(eta), q.gram)
    clauses["adjoint"] = float(np.abs(lhs - rhs).max(initial=0.0)) / scale

    mask = np.flatnonzero(np.asarray(alg.a0_mask))
    prod_rep = np.einsum("ijk,krs->ijrs", alg.mult, pis)
    direct = np.einsum("irt,jts->ijrs", pis, pis)
    clauses["homomorphism"] = float(
        np.abs((prod_rep - direct)[:, mask]).max(initial=0.0))

    orbit = np.einsum("jrs,s->jr", pis[mask], rep.cyclic)
    cyc_rank = int(np.linalg.matrix_rank(orbit, tol=None))
    clauses["cyclic_rank_defect"] = float(r - cyc_rank)

    vs = np.einsum("irs,s->ir", pis, rep.cyclic)
    recon = np.einsum("ip,jq,pq...->ij...", vs, np.conj(vs), q.gram)
    clauses["factorization"] = float(np.abs(recon - phi.coeffs).max(initial=0.0)) / scale

    pi_e = np.einsum("k,krs->rs", alg.unit_coords, pis)
    clauses["unit"] = float(np.abs(pi_e - np.eye(r)).max(initial=0.0))
    clauses["welldef"] = rep.welldef_residual

    passed = all(v <= tol for v in clauses.values())
    return GnsReport(clauses, trials, seed, tol, passed, cyc_rank)


@dataclass(frozen=True)
class GnsStateResult:
    rep: GnsRep
    eta: np.ndarray = field(compare=False)
    residual_triple: float = 0.0   # omega(b* a c) = <Pi(a) lam(c), lam(b)>
    residual_state: float = 0.0    # omega(a) = <Pi(a) eta, eta>


def gns_from_state(omega: LinearPositiveMap, rank_tol: float | None = None,
                   tol: float = 1e-8) -> GnsStateResult:
    """GNS data of a positive linear map on a unital *-algebra (A0 = A)."""
    alg = omega.algebra
    if not all(alg.a0_mask):
        raise ValueError("state construction needs A0 = A")
    phi = induced_form(omega)
    rep = build_gns(phi, rank_tol, tol)
    q = rep.quotient
    if q.rank == 0:
        return GnsStateResult(rep, rep.cyclic, 0.0, 0.0)
    bsa = np.einsum("uj,uil->jil", alg.invol, alg.mult)       # coords of a_j* a_i
    bsac = np.einsum("jil,lkm->jikm", bsa, alg.mult)          # coords of a_j* a_i a_k
    lhs = np.einsum("jikm,m...->ijk...", bsac, omega.images)
    rp = np.einsum("irs,sk->irk", rep.rep, q.lam)             # pi(a_i) lam(a_k)
    rhs = np.einsum("ipk,qj,pq...->ijk...", rp, np.conj(q.lam), q.gram)
    scale = max(1.0, float(np.abs(omega.images).max(initial=0.0)))
    res_triple = float(np.abs(lhs - rhs).max(initial=0.0)) / scale
    vals = np.einsum("irs,s,q,rq...->i...", rep.rep, rep.cyclic,
                     np.conj(rep.cyclic), q.gram)
    res_state = float(np.abs(vals - omega.images).max(initial=0.0)) / scale
    return GnsStateResult(rep, rep.cyclic, res_triple, res_state)
