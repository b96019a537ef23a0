"""Dilations of completely positive sesquilinear maps and their intertwiners.

A ``CPForm`` is a map Phi on A x A whose values are sesquilinear maps on a
normed fiber space X, stored as a (d, d, m, m, *target.shape) table with

    Phi(a_i, a_j)(x_k, x_l) = coeffs[i, j, k, l]

(linear in i and k, conjugate-linear in j and l).  Its sesquilinear extension
to the d*m tensor coordinates of A (x) X, with u_(i,k) = a_i (x) x_k, is a
plain SesquiForm; complete positivity of the table is positivity of the
extension.

``build_stinespring`` quotients the tensor coordinates by the null space,
induces pi(a)(b (x) x) = (a b) (x) x on the A0 (x) X span, and sets
V x = lam(e (x) x).  The factorization

    Phi(a, b)(x1, x2) = < pi(a) V x1, pi(b) V x2 >

is checked on all basis 4-tuples, the span equality as a rank condition, and
the norm bound ||V||^2 <= M ||e||^2 with ||V|| a witness supremum over
sampled fiber directions, coordinate extremes and a local refinement (a
certified lower bound, so the bound check is sound).

The Radon-Nikodym operator of a dominated pair (sum Psi <= gamma sum Phi in
the cone order) is T lam_Phi(u) = lam_Psi(u); with an order-preserving target
norm its witness norm never exceeds sqrt(gamma).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bimodules as bm
from .algebras import QuasiAlgebra
from .bimodules import BimoduleSpace, ShapeError
from .forms import (CsReport, PositivityError, SesquiForm, cone_mask_batch,
                    check_positive, exact_positivity_capable, sesqui_form)
from .gns import (GnsRep, QuotientSpace, SpanError, _extend_rep,
                  build_quotient, gram_ip_batch, quotient_norms)


class DominationError(ValueError):
    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


# ---------------------------------------------------------------------------
# fiber spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiberSpace:
    """The normed vector space X on which the values of a CPForm act.

    ``euclid``: C^m with the Euclidean norm.  ``matrix``: q x q matrices
    (m = q^2 coordinates, row-major) with the operator norm.
    """
    kind: str
    dim: int
    q: int | None = None

    def norms(self, coords: np.ndarray) -> np.ndarray:
        if self.kind == "euclid":
            return np.linalg.norm(coords, axis=-1)
        mats = coords.reshape(coords.shape[:-1] + (self.q, self.q))
        return np.linalg.svd(mats, compute_uv=False)[..., 0]

    def basis_matrices(self) -> np.ndarray:
        if self.kind != "matrix":
            raise ValueError("not a matrix fiber")
        return np.eye(self.dim, dtype=np.complex128).reshape(self.dim, self.q, self.q)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "q": self.q}


def euclid_fiber(m: int) -> FiberSpace:
    return FiberSpace("euclid", int(m))


def matrix_fiber(q: int) -> FiberSpace:
    return FiberSpace("matrix", int(q) * int(q), int(q))


# ---------------------------------------------------------------------------
# CP forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CPForm:
    dim: int
    fiber: FiberSpace
    target: BimoduleSpace
    coeffs: np.ndarray = field(compare=False)  # (d, d, m, m, *target.shape)
    algebra: QuasiAlgebra | None = field(default=None, compare=False)
    bound: float | None = None                  # declared true bound M, if known
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.abs(self.coeffs).max(initial=0.0)))


def cp_form(fiber: FiberSpace, target: BimoduleSpace, coeffs,
            algebra: QuasiAlgebra | None = None, bound: float | None = None,
            meta: dict | None = None) -> CPForm:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim < 4 or coeffs.shape[0] != coeffs.shape[1] \
            or coeffs.shape[2] != fiber.dim or coeffs.shape[3] != fiber.dim \
            or coeffs.shape[4:] != target.shape:
        raise ShapeError("table shape does not match (d, d, m, m, *target.shape)")
    return CPForm(coeffs.shape[0], fiber, target, coeffs, algebra, bound,
                  meta or {})


def extend_to_tensor(cp: CPForm) -> SesquiForm:
    """The sesquilinear extension to the d*m tensor coordinates of A (x) X."""
    d, m = cp.dim, cp.fiber.dim
    tail = cp.coeffs.shape[4:]
    t2 = np.transpose(cp.coeffs, (0, 2, 1, 3) + tuple(range(4, cp.coeffs.ndim)))
    return sesqui_form(cp.target, t2.reshape((d * m, d * m) + tail))


def tensor_to_cp(phi: SesquiForm, d: int, fiber: FiberSpace,
                 algebra=None, bound=None) -> CPForm:
    """Inverse of ``extend_to_tensor`` (exact round trip)."""
    m = fiber.dim
    tail = phi.coeffs.shape[2:]
    t4 = phi.coeffs.reshape((d, m, d, m) + tail)
    t4 = np.transpose(t4, (0, 2, 1, 3) + tuple(range(4, t4.ndim)))
    return cp_form(fiber, phi.target, t4, algebra, bound)


def eval_cp(cp: CPForm, a, b, x1, x2) -> np.ndarray:
    """Phi(a, b)(x1, x2) coordinates for single coordinate vectors."""
    return np.einsum("i,j,k,l,ijkl...->...", a, np.conj(b), x1, np.conj(x2),
                     cp.coeffs)


def _left_inv_residual(alg: QuasiAlgebra, coeffs: np.ndarray) -> float:
    mask = np.flatnonzero(np.asarray(alg.a0_mask))
    lhs = np.einsum("iju,uk...->ijk...", alg.mult, coeffs)
    rhs = np.einsum("ui,ukv,jv...->ijk...", np.conj(alg.invol),
                    np.conj(alg.mult), coeffs)
    diff = np.abs(lhs - rhs)[np.ix_(range(alg.dim), mask, mask)]
    scale = max(1.0, float(np.abs(coeffs).max(initial=0.0)))
    return float(diff.max(initial=0.0)) / scale


def cp_left_invariance_residual(cp: CPForm) -> float:
    if cp.algebra is None:
        raise ValueError("left-invariance needs a quasi-algebra")
    return _left_inv_residual(cp.algebra, cp.coeffs)


@dataclass(frozen=True)
class CPVerdict:
    status: str                 # verified-exact | no-counterexample | counterexample
    witness: object = None
    lifted_psd: bool | None = None  # sufficient-only certificate, matrix targets
    mode: str = "sampled"
    trials: int = 0
    seed: int = 0

    @property
    def ok(self):
        return self.status != "counterexample"


def check_cp(cp: CPForm, mode: str = "auto", trials: int = 10000,
             tol: float = 1e-10, seed: int = 0) -> CPVerdict:
    """Complete positivity via positivity of the tensor extension.

    Exact for targets with scalar output coordinates; sampled otherwise.  For
    PSD-cone targets the PSD-ness of the lifted block matrix
    B[(u,a),(v,b)] = table[u,v][a,b] is reported as a sufficient-only
    certificate.  A counterexample is returned as an explicit tuple
    (a_i, x_i)_i of length N obtained from the rank decomposition of the
    violating tensor vector.
    """
    ext = extend_to_tensor(cp)
    lifted = None
    if cp.target.kind in bm.MATRIX_KINDS:
        n = cp.target.shape[0]
        dm = ext.dim
        block = np.transpose(ext.coeffs, (0, 2, 1, 3)).reshape(dm * n, dm * n)
        w = np.linalg.eigvalsh(0.5 * (block + block.conj().T))
        herm = np.abs(block - block.conj().T).max(initial=0.0)
        lifted = bool(w[0] >= -tol * cp.scale and herm <= 10 * tol * cp.scale)
    if mode == "auto":
        mode = "exact" if exact_positivity_capable(cp.target) else "sampled"
    verdict = check_positive(ext, mode=mode, trials=trials, tol=tol, seed=seed)
    witness = verdict.witness
    if verdict.status == "counterexample" and witness is not None:
        witness = tensor_witness_tuple(np.asarray(witness), cp.dim, cp.fiber.dim)
    return CPVerdict(verdict.status, witness, lifted, mode, trials, seed)


def tensor_witness_tuple(u: np.ndarray, d: int, m: int) -> dict:
    """Decompose a tensor-space vector into an explicit (a_i, x_i) tuple."""
    mat = u.reshape(d, m)
    uu, s, vh = np.linalg.svd(mat)
    keep = s > s[0] * 1e-12 if len(s) and s[0] > 0 else []
    terms = [{"a": [complex(c) for c in uu[:, i] * s[i]],
              "x": [complex(c) for c in vh[i].conj()]}
             for i in np.flatnonzero(keep)]
    return {"n_terms": len(terms), "terms": terms, "tensor": [complex(c) for c in u]}


# ---------------------------------------------------------------------------
# the dilation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StinespringTriple:
    quotient: QuotientSpace
    rep: np.ndarray = field(compare=False)    # (d, r, r)
    v: np.ndarray = field(compare=False)      # (r, m): V x = v @ x
    algebra: QuasiAlgebra = field(compare=False)
    fiber: FiberSpace = field(compare=False)
    bound_m: float = float("nan")
    bound_method: str = "estimated"
    e_norm: float = float("nan")
    v_norm: float = float("nan")
    v_norm_method: str = "witness"
    residuals: dict = field(default_factory=dict, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def rank(self) -> int:
        return self.quotient.rank

    def v_bound_margin(self, tol: float = 1e-9) -> float:
        return self.v_norm ** 2 - self.bound_m * self.e_norm ** 2 * (1 + tol)


def build_stinespring(cp: CPForm, rank_tol: float | None = None,
                      tol: float = 1e-8, ambient_unitary: np.ndarray | None = None,
                      seed: int = 0, n_dirs: int = 4096,
                      cp_trials: int = 2000) -> StinespringTriple:
    """Construct a minimal triple (pi, V, quotient) decomposing ``cp``.

    Raises on a CP counterexample, a left-invariance violation, or a failed
    span condition.  ``ambient_unitary`` (a d*m unitary) changes the quotient
    section, producing a different triple of the same form.
    """
    alg = cp.algebra
    if alg is None:
        raise ValueError("the dilation needs a quasi-algebra")
    li = cp_left_invariance_residual(cp)
    if li > tol:
        raise ValueError(f"left-invariance violated: residual {li:.3e}")
    verdict = check_cp(cp, trials=cp_trials, seed=seed + 7)
    if not verdict.ok:
        raise PositivityError("form is not completely positive")
    d, m = cp.dim, cp.fiber.dim
    ext = extend_to_tensor(cp)
    q = build_quotient(ext, rank_tol, ambient_unitary)

    span_idx = np.array([j * m + l for j in np.flatnonzero(np.asarray(alg.a0_mask))
                         for l in range(m)])
    span_cols = np.eye(d * m, dtype=np.complex128)[:, span_idx]
    eye_m = np.eye(m)
    l_all = np.stack([np.kron(alg.mult[i].T, eye_m) for i in range(d)])
    rep, welldef = _extend_rep(q, alg, l_all, tol, span_cols)
    v = q.lam @ np.kron(alg.unit_coords[:, None], eye_m)

    residuals = {"welldef": welldef, "left_invariance": li}
    if q.rank:
        w = np.einsum("irs,sk->irk", rep, v)
        recon = np.einsum("ipk,jql,pq...->ijkl...", w, np.conj(w), q.gram)
        residuals["factorization"] = float(
            np.abs(recon - cp.coeffs).max(initial=0.0)) / cp.scale
        orbit = np.transpose(w, (0, 2, 1)).reshape(d * m, q.rank)
        residuals["span_rank_defect"] = float(q.rank - np.linalg.matrix_rank(orbit))
    else:
        residuals["factorization"] = 0.0
        residuals["span_rank_defect"] = 0.0

    rng = np.random.default_rng(seed)
    dirs = _fiber_directions(cp.fiber, rng, n_dirs)
    vn = _refine_v_norm(q, v, cp.fiber, dirs, rng)
    e_norm = alg.norm(alg.unit_coords)
    if cp.bound is not None:
        bound_m, bmethod = float(cp.bound), "declared"
    else:
        bound_m, bmethod = _estimate_bound(cp, dirs, rng, e_norm), "estimated"
    return StinespringTriple(q, rep, v, alg, cp.fiber, bound_m, bmethod,
                             e_norm, vn, "witness", residuals, dict(cp.meta))


def _fiber_directions(fiber: FiberSpace, rng, n: int) -> np.ndarray:
    m = fiber.dim
    g = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    dirs = [np.eye(m, dtype=np.complex128), g]
    if fiber.kind == "matrix":
        q = fiber.q
        u = bm._haar_unitaries(rng, 32, q).reshape(32, m)
        flat_id = np.eye(q, dtype=np.complex128).reshape(1, m)
        dirs += [u, flat_id]
    dirs = np.concatenate(dirs)
    return dirs / np.maximum(fiber.norms(dirs), 1e-300)[:, None]


def _refine_v_norm(q: QuotientSpace, v: np.ndarray, fiber: FiberSpace,
                   dirs: np.ndarray, rng, rounds: int = 6) -> float:
    if q.rank == 0:
        return 0.0
    vals = quotient_norms(q, dirs @ v.T)
    best = float(vals.max())
    x0 = dirs[int(np.argmax(vals))]
    sigma = 0.5
    for _ in range(rounds):
        pert = x0 + sigma * (rng.standard_normal((64, fiber.dim))
                             + 1j * rng.standard_normal((64, fiber.dim)))
        pert /= np.maximum(fiber.norms(pert), 1e-300)[:, None]
        pvals = quotient_norms(q, pert @ v.T)
        i = int(np.argmax(pvals))
        if pvals[i] > best:
            best = float(pvals[i])
            x0 = pert[i]
        sigma *= 0.5
    return best


def _estimate_bound(cp: CPForm, dirs: np.ndarray, rng, e_norm: float,
                    trials: int = 512) -> float:
    """Empirical bound including the (e, e, x, x) family over the same fiber
    directions used for ||V||, so the dilation bound check stays coherent."""
    alg = cp.algebra
    e = alg.unit_coords
    diag = np.einsum("i,j,bk,bl,ijkl...->b...", e, np.conj(e), dirs,
                     np.conj(dirs), cp.coeffs)
    vals = bm.norms_batch(cp.target, diag, assume_cone=True)
    best = float(vals.max(initial=0.0)) / e_norm ** 2
    d, m = cp.dim, cp.fiber.dim
    a = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    b = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    x = rng.standard_normal((trials, m)) + 1j * rng.standard_normal((trials, m))
    y = rng.standard_normal((trials, m)) + 1j * rng.standard_normal((trials, m))
    na, nb = alg.norms(a), alg.norms(b)
    nx, ny = cp.fiber.norms(x), cp.fiber.norms(y)
    off = np.einsum("bi,bj,bk,bl,ijkl...->b...", a, np.conj(b), x, np.conj(y),
                    cp.coeffs)
    nv = bm.norms_batch(cp.target, off)
    ratios = nv / np.maximum(na * nb * nx * ny, 1e-300)
    return max(best, float(ratios.max(initial=0.0)))


def reconstruct_tensor(t: StinespringTriple) -> np.ndarray:
    """The (D, D, *shape) tensor-extension table encoded by the triple."""
    q = t.quotient
    return np.einsum("pu,qv,pq...->uv...", q.lam, np.conj(q.lam), q.gram)


# ---------------------------------------------------------------------------
# uniqueness up to unitaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UnitaryEquivReport:
    u: np.ndarray = field(compare=False)
    residuals: dict = field(default_factory=dict, compare=False)
    passed: bool = False


def unitary_equiv(t1: StinespringTriple, t2: StinespringTriple,
                  tol: float = 1e-8, trials: int = 200,
                  seed: int = 0) -> UnitaryEquivReport:
    """The unitary carrying one triple of a form onto another.

    U is defined on the spanning set by U(pi_1(a) V_1 x) = pi_2(a) V_2 x;
    concretely U = lam_2 lam_1^H.  Verifies U V_1 = V_2, the intertwining
    relation, and preservation of the bimodule-valued inner product.  Raises
    if the two triples do not decompose the same form (Gram mismatch).
    """
    r1 = reconstruct_tensor(t1)
    r2 = reconstruct_tensor(t2)
    scale = max(1.0, float(np.abs(r1).max(initial=0.0)))
    gram_mismatch = float(np.abs(r1 - r2).max(initial=0.0)) / scale
    if gram_mismatch > max(tol * 100, 1e-6):
        raise ValueError(f"triples decompose different forms "
                         f"(table mismatch {gram_mismatch:.3e})")
    u = t2.quotient.lam @ t1.quotient.lam.conj().T
    res = {"welldef_gram": gram_mismatch}
    res["v"] = float(np.abs(u @ t1.v - t2.v).max(initial=0.0))
    res["intertwine"] = float(np.abs(np.einsum("pq,iqr->ipr", u, t1.rep)
                                     - np.einsum("ipq,qr->ipr", t2.rep, u))
                              .max(initial=0.0))
    rng = np.random.default_rng(seed)
    r = t1.rank
    xi = rng.standard_normal((trials, r)) + 1j * rng.standard_normal((trials, r))
    eta = rng.standard_normal((trials, r)) + 1j * rng.standard_normal((trials, r))
    ip1 = gram_ip_batch(t1.quotient, xi, eta)
    ip2 = gram_ip_batch(t2.quotient, xi @ u.T, eta @ u.T)
    res["ip_preserve"] = float(np.abs(ip1 - ip2).max(initial=0.0)) / scale
    res["unitarity"] = float(np.abs(u @ u.conj().T - np.eye(t2.rank)).max(initial=0.0))
    passed = all(v <= tol for v in res.values())
    return UnitaryEquivReport(u, res, passed)


# ---------------------------------------------------------------------------
# Radon-Nikodym intertwiners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RNOperator:
    t: np.ndarray = field(compare=False)      # (r_psi, r_phi)
    gamma: float = 1.0
    norm_estimate: float = float("nan")
    norm_method: str = "witness"
    residuals: dict = field(default_factory=dict, compare=False)
    order_preserving: bool = True

    def contraction_margin(self, tol: float = 1e-9) -> float:
        return self.norm_estimate - np.sqrt(self.gamma) * (1 + tol)


def _check_domination_cp(psi: CPForm, phi: CPForm, gamma: float, rng,
                         trials: int, tol: float):
    d, m = phi.dim, phi.fiber.dim
    ext_phi, ext_psi = extend_to_tensor(phi), extend_to_tensor(psi)
    scale = max(phi.scale, psi.scale)
    for n in (1, 2, 4):
        a = rng.standard_normal((trials, n, d)) + 1j * rng.standard_normal((trials, n, d))
        x = rng.standard_normal((trials, n, m)) + 1j * rng.standard_normal((trials, n, m))
        u = np.einsum("tni,tnk->tik", a, x).reshape(trials, d * m)
        dphi = np.einsum("tu,tv,uv...->t...", u, np.conj(u), ext_phi.coeffs)
        dpsi = np.einsum("tu,tv,uv...->t...", u, np.conj(u), ext_psi.coeffs)
        ok, _ = cone_mask_batch(phi.target, gamma * dphi - dpsi, tol, scale)
        if not ok.all():
            t = int(np.argmax(~ok))
            raise DominationError(
                f"domination violated on a sampled {n}-tuple",
                {"n": n, "a": a[t].tolist(), "x": x[t].tolist()})


def radon_nikodym(psi: CPForm, phi: CPForm, gamma: float, tol: float = 1e-8,
                  trials: int = 64, seed: int = 0, n_dirs: int = 4096,
                  triples: tuple | None = None) -> RNOperator:
    """The intertwiner T with T lam_Phi(u) = lam_Psi(u) of a dominated pair.

    Preconditions are spot-verified: sum Psi <= gamma sum Phi on sampled
    tuples of sizes 1, 2, 4, and N_Phi inside N_Psi (otherwise T is not
    well-defined).  Residuals cover T V_Phi = V_Psi, the intertwining
    relation on the A0 (x) X span, and the factorization of Psi through T.
    """
    rng = np.random.default_rng(seed)
    _check_domination_cp(psi, phi, gamma, rng, trials, max(tol, 1e-8))
    if triples is None:
        t_phi = build_stinespring(phi, tol=tol, seed=seed + 1)
        t_psi = build_stinespring(psi, tol=tol, seed=seed + 2)
    else:
        t_phi, t_psi = triples
    q_phi, q_psi = t_phi.quotient, t_psi.quotient
    kern = q_phi.kernel
    if kern.shape[1]:
        leak = float(np.abs(q_psi.lam @ kern).max(initial=0.0))
        if leak > max(tol * 100, 1e-6):
            raise DominationError(f"null-space inclusion fails (leak {leak:.3e})")
    t_mat = q_psi.lam @ q_phi.lam.conj().T

    res = {"tv": float(np.abs(t_mat @ t_phi.v - t_psi.v).max(initial=0.0))}
    alg, m = phi.algebra, phi.fiber.dim
    span_idx = np.array([j * m + l
                         for j in np.flatnonzero(np.asarray(alg.a0_mask))
                         for l in range(m)])
    span = q_phi.lam[:, span_idx]
    inter = np.einsum("pq,iqr,rs->ips", t_mat, t_phi.rep, span) \
        - np.einsum("ipq,qr,rs->ips", t_psi.rep, t_mat, span)
    res["intertwine"] = float(np.abs(inter).max(initial=0.0))
    w = np.einsum("pq,iqr,rk->ipk", t_mat, t_phi.rep, t_phi.v)
    recon = np.einsum("ipk,jql,pq...->ijkl...", w, np.conj(w), q_psi.gram)
    res["factorization"] = float(np.abs(recon - psi.coeffs).max(initial=0.0)) / psi.scale

    norm_est = _operator_norm_estimate(q_phi, q_psi, t_mat, rng, n_dirs)
    return RNOperator(t_mat, gamma, norm_est, "witness", res,
                      phi.target.order_preserving)


def _operator_norm_estimate(q_from, q_to, t_mat, rng, n_dirs):
    r = q_from.rank
    if r == 0:
        return 0.0
    u = rng.standard_normal((n_dirs, r)) + 1j * rng.standard_normal((n_dirs, r))
    u = np.concatenate([u, np.eye(r, dtype=np.complex128)])
    n_from = quotient_norms(q_from, u)
    n_to = quotient_norms(q_to, u @ t_mat.T)
    keep = n_from > 1e-12
    if not keep.any():
        return 0.0
    return float((n_to[keep] / n_from[keep]).max())


def radon_nikodym_positive(psi: SesquiForm, phi: SesquiForm, gamma: float,
                           tol: float = 1e-8, trials: int = 256, seed: int = 0,
                           n_dirs: int = 4096,
                           reps: tuple[GnsRep, GnsRep] | None = None) -> RNOperator:
    """Radon-Nikodym operator for plain positive left-invariant forms.

    Requires an order-preserving target norm and diagonal domination
    Psi(x, x) <= gamma Phi(x, x) (spot-verified on samples).  T is defined by
    T pi_Phi(a) xi_Phi = pi_Psi(a) xi_Psi and verified to factor Psi.
    """
    if not phi.target.order_preserving:
        raise ValueError("positive-map Radon-Nikodym needs an order-preserving norm")
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((trials, phi.dim)) + 1j * rng.standard_normal((trials, phi.dim))
    dphi = np.einsum("ti,tj,ij...->t...", xs, np.conj(xs), phi.coeffs)
    dpsi = np.einsum("ti,tj,ij...->t...", xs, np.conj(xs), psi.coeffs)
    ok, _ = cone_mask_batch(phi.target, gamma * dphi - dpsi, max(tol, 1e-8),
                            max(phi.scale, psi.scale))
    if not ok.all():
        t = int(np.argmax(~ok))
        raise DominationError("diagonal domination violated", {"x": xs[t].tolist()})
    if reps is None:
        from .gns import build_gns
        rep_phi = build_gns(phi, tol=tol)
        rep_psi = build_gns(psi, tol=tol)
    else:
        rep_phi, rep_psi = reps
    q_phi, q_psi = rep_phi.quotient, rep_psi.quotient
    kern = q_phi.kernel
    if kern.shape[1]:
        leak = float(np.abs(q_psi.lam @ kern).max(initial=0.0))
        if leak > max(tol * 100, 1e-6):
            raise DominationError(f"null-space inclusion fails (leak {leak:.3e})")
    t_mat = q_psi.lam @ q_phi.lam.conj().T

    res = {"cyclic": float(np.abs(t_mat @ rep_phi.cyclic - rep_psi.cyclic)
                           .max(initial=0.0))}
    alg = phi.algebra
    mask = np.flatnonzero(np.asarray(alg.a0_mask))
    span = np.einsum("jrs,s->rj", rep_phi.rep[mask], rep_phi.cyclic)
    inter = np.einsum("pq,iqr,rj->ipj", t_mat, rep_phi.rep, span) \
        - np.einsum("ipq,qr,rj->ipj", rep_psi.rep, t_mat, span)
    res["intertwine"] = float(np.abs(inter).max(initial=0.0))
    w = np.einsum("pq,iqr,r->ip", t_mat, rep_phi.rep, rep_phi.cyclic)
    recon = np.einsum("ip,jq,pq...->ij...", w, np.conj(w), q_psi.gram)
    res["factorization"] = float(np.abs(recon - psi.coeffs).max(initial=0.0)) / psi.scale

    norm_est = _operator_norm_estimate(q_phi, q_psi, t_mat, rng, n_dirs)
    return RNOperator(t_mat, gamma, norm_est, "witness", res, True)


# ---------------------------------------------------------------------------
# relative complete positivity: lifts through Gamma and Psi
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OperatorTable:
    """A d x d table of operator-valued entries B(X, Z): the raw data of the
    relative-CP notions before lifting to a CPForm.

    coeffs[i, j] has shape (*out_shape, q, q): the entry maps a q x q fiber
    matrix to out_shape coordinates.
    """
    algebra: QuasiAlgebra = field(compare=False)
    fiber: FiberSpace = field(compare=False)           # X, matrix kind
    out_space: BimoduleSpace = field(compare=False)    # Z (psi) or Y (gamma)
    coeffs: np.ndarray = field(compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def entry_space(self) -> BimoduleSpace:
        return bm.op_map("vn", self.fiber.q, self.out_space)


@dataclass(frozen=True)
class GammaMap:
    """A bounded sesquilinear product Gamma: X x X -> X on a matrix fiber."""
    name: str = "mul-adjoint"                  # Gamma(T1, T2) = T1 T2*
    norm_declared: float | None = 1.0
    ball_surjective: bool = True               # Gamma(B1 x B1) = B1

    def basis_values(self, fiber: FiberSpace) -> np.ndarray:
        e = fiber.basis_matrices()
        if self.name == "mul-adjoint":
            return np.einsum("kab,lcb->klac", e, np.conj(e))
        if self.name == "zero":
            m = fiber.dim
            return np.zeros((m, m, fiber.q, fiber.q), dtype=np.complex128)
        raise ValueError(f"unknown Gamma {self.name!r}")


@dataclass(frozen=True)
class PsiMap:
    """A bounded sesquilinear pairing Psi: Z x X -> Y on matrix spaces."""
    target: BimoduleSpace
    name: str = "right-mul-adjoint"            # Psi(Z, X) = X* Z
    norm_declared: float | None = 1.0
    norming: bool = True                       # ||z|| = sup_x ||Psi(z, x)||


def gamma_lift(table: OperatorTable, gamma_map: GammaMap) -> CPForm:
    """The CPForm Phi(a, b)(x1, x2) = Phi(a, b)(Gamma(x1, x2)) of a
    relative-CP operator table; carries the specialized dilation bound
    ||V||^2 <= ||Phi(e, e)|| ||Gamma|| in its metadata."""
    g = gamma_map.basis_values(table.fiber)
    coeffs = np.einsum("ij...rs,klrs->ijkl...", table.coeffs, g)
    meta = dict(table.meta)
    meta["lift"] = "gamma"
    meta["gamma_ball_surjective"] = gamma_map.ball_surjective
    gn = gamma_map.norm_declared
    meta["gamma_norm"] = gn
    ee = np.einsum("i,j,ij...->...", table.algebra.unit_coords,
                   np.conj(table.algebra.unit_coords), table.coeffs)
    ee_norm = bm.norm(table.entry_space(), ee)
    meta["ee_norm"] = ee_norm.value
    meta["ee_norm_method"] = ee_norm.method
    if gn is not None and ee_norm.method == "exact":
        meta["v_bound_special"] = ee_norm.value * gn
    return cp_form(table.fiber, table.out_space, coeffs, table.algebra,
                   bound=table.meta.get("bound"), meta=meta)


def psi_lift(table: OperatorTable, psi_map: PsiMap) -> CPForm:
    """The CPForm Phi(a, b)(x1, x2) = Psi(Phi(a, b) x1, x2); carries the
    specialized bound ||V||^2 <= ||Phi(e, e)|| ||Psi||."""
    if psi_map.name != "right-mul-adjoint":
        raise ValueError(f"unknown Psi {psi_map.name!r}")
    e = table.fiber.basis_matrices()
    zvals = np.einsum("ij...rs,krs->ijk...", table.coeffs, e)
    coeffs = np.einsum("ijkab,lac->ijklcb", zvals, np.conj(e))
    meta = dict(table.meta)
    meta["lift"] = "psi"
    meta["psi_norm"] = psi_map.norm_declared
    meta["psi_norming"] = psi_map.norming
    if "ee_opnorm" in table.meta and psi_map.norm_declared is not None:
        meta["v_bound_special"] = table.meta["ee_opnorm"] * psi_map.norm_declared
    return cp_form(table.fiber, psi_map.target, coeffs, table.algebra,
                   bound=table.meta.get("bound"), meta=meta)


@dataclass(frozen=True)
class OpNormCsReport:
    trials: int
    seed: int
    worst_margin: float
    asserted: bool    # right sides exact (cone norms); margin > 0 is genuine
    passed: bool


def verify_opnorm_cs(table: OperatorTable, trials: int = 200, tol: float = 1e-9,
                     seed: int = 0, n_witness=(32, 32)) -> OpNormCsReport:
    """Operator-norm Cauchy-Schwarz ||Phi(a,b)|| <= ||Phi(a,a)||^1/2 ||Phi(b,b)||^1/2
    for a relative-CP table whose lift makes the diagonals cone elements
    (Gamma ball-surjective, or Psi norming with norm one)."""
    rng = np.random.default_rng(seed)
    d = table.dim
    a = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    b = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    space = table.entry_space()
    off = np.einsum("ti,tj,ij...->t...", a, np.conj(b), table.coeffs)
    d1 = np.einsum("ti,tj,ij...->t...", a, np.conj(a), table.coeffs)
    d2 = np.einsum("ti,tj,ij...->t...", b, np.conj(b), table.coeffs)
    wit = bm.opmap_witnesses(space, rng, *n_witness)
    left = bm.norms_batch(space, off, witnesses=wit)
    right = np.sqrt(bm.norms_batch(space, d1, assume_cone=True)
                    * bm.norms_batch(space, d2, assume_cone=True))
    margin = float((left - (right * (1 + tol) + tol)).max(initial=-np.inf))
    return OpNormCsReport(trials, seed, margin, True, margin <= 0)


@dataclass(frozen=True)
class SeriesCpReport:
    n_terms: int
    lhs: float
    rhs: float
    margin: float
    passed: bool


def verify_series_cp_cs(cps, a_list, at_list, x_list, xt_list,
                        tol: float = 1e-9) -> SeriesCpReport:
    """Truncated series inequality for CP maps:

        ||sum_n Phi_n(a_n, at_n)(x_n, xt_n)||
            <= ||sum_n Phi_n(a_n, a_n)(x_n, x_n)||^1/2
               ||sum_n Phi_n(at_n, at_n)(xt_n, xt_n)||^1/2.
    """
    space = cps[0].target
    if not space.order_preserving:
        raise ValueError("series inequality needs an order-preserving target norm")
    off = sum(eval_cp(c, a, at, x, xt)
              for c, a, at, x, xt in zip(cps, a_list, at_list, x_list, xt_list))
    dg1 = sum(eval_cp(c, a, a, x, x) for c, a, x in zip(cps, a_list, x_list))
    dg2 = sum(eval_cp(c, at, at, xt, xt) for c, at, xt in zip(cps, at_list, xt_list))
    lhs = float(bm.norms_batch(space, off[None])[0])
    rhs = float(np.sqrt(bm.norms_batch(space, dg1[None], assume_cone=True)[0]
                        * bm.norms_batch(space, dg2[None], assume_cone=True)[0]))
    margin = lhs - (rhs * (1 + tol) + tol)
    return SeriesCpReport(len(cps), lhs, rhs, float(margin), margin <= 0)
