"""Concrete ordered Banach bimodules: coordinates, cones, norms, module actions.

Eight kinds of target space are supported.  Each space holds complex128
coordinate arrays whose shape and semantics depend on the kind:

===============  ==================  ============================  =====================
kind             coordinates         norm                          positive cone
===============  ==================  ============================  =====================
L2Finite(n)      (n,) values         Euclidean                     entrywise >= 0
MeasuresFinite   (n,) atom masses    total variation sum(|c|)      entrywise >= 0
CGrid(n)         (n,) grid values    sup |c|                       entrywise >= 0
L1Trace(n)       (n, n) matrix       trace norm (Schatten-1)       PSD
DualVN(n)        (n, n) density F    trace norm of F               PSD
                 of A -> tr(F A)
BCC(m, k)        (k, m) kernel K     max row l1 sum                entrywise >= 0
SeqC(N, m)       (N, m) f_n(t)       max_t sqrt(sum_n |f_n(t)|^2)  entrywise >= 0
OpMap(dom, cod)  (*cod, p, p) or     operator norm, witnessed      maps PSD inputs
                 (*cod, p) tensor    (exact on the cone)           into cod's cone
===============  ==================  ============================  =====================

The acting *-algebra Y0 is pointwise functions for the function/measure kinds,
the full matrix algebra for the matrix kinds, the space itself for SeqC, the
domain algebra for BCC and OpMap.  ``sandwich(space, z, y)`` computes z* y z
through the module action and maps the cone into itself.

OpMap norms: for a cone element the supremum over the domain unit ball is
attained at the domain unit (spectral decomposition of unitaries plus convexity
of the unit ball), so the norm is exact there.  Off the cone the norm is a
certified lower bound: the maximum of the codomain norm over the image of a
seeded witness set {identity} + Haar unitaries + contractions.

All cone tests are relative: a coordinate / eigenvalue may undershoot zero by
``tol * max(1, s)`` where s is the Euclidean size of the coordinate array.
Spaces and elements are immutable after construction; every operation returns
fresh arrays, so concurrent reads are safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ENTRYWISE_KINDS = ("L2Finite", "MeasuresFinite", "CGrid", "SeqC", "BCC")
MATRIX_KINDS = ("L1Trace", "DualVN")
ALL_KINDS = ENTRYWISE_KINDS + MATRIX_KINDS + ("OpMap",)

# default witness budget for single-element OpMap norms, seed recorded in reports
OPMAP_WITNESS_UNITARIES = 256
OPMAP_WITNESS_CONTRACTIONS = 256
OPMAP_WITNESS_SEED = 0x6F70_6D61


class ShapeError(ValueError):
    """Coordinates do not match the space, or a Y0 element does not act on it."""


@dataclass(frozen=True)
class OpDomain:
    """Domain descriptor of an OpMap space: a matrix algebra ("vn") of size
    dim x dim with operator norm, or a commutative function algebra ("comm")
    on dim points with sup norm."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("vn", "comm"):
            raise ValueError(f"unknown OpMap domain kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("domain dim must be >= 1")


@dataclass(frozen=True)
class BimoduleSpace:
    kind: str
    shape: tuple
    order_preserving: bool
    grid: tuple | None = None
    domain: OpDomain | None = None
    codomain: "BimoduleSpace | None" = None
    k0_generators: tuple = field(default=(), compare=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def descriptor(self) -> dict:
        d = {"kind": self.kind, "shape": list(self.shape)}
        if self.grid is not None:
            d["grid"] = list(self.grid)
        if self.domain is not None:
            d["domain"] = {"kind": self.domain.kind, "dim": self.domain.dim}
        if self.codomain is not None:
            d["codomain"] = self.codomain.descriptor()
        return d


def l2_finite(n: int, grid=None) -> BimoduleSpace:
    _check_dim(n)
    return BimoduleSpace("L2Finite", (n,), True, grid=_as_grid(grid))


def measures_finite(n: int) -> BimoduleSpace:
    _check_dim(n)
    return BimoduleSpace("MeasuresFinite", (n,), True)


def c_grid(n: int, lo: float = 0.0, hi: float = 1.0) -> BimoduleSpace:
    _check_dim(n)
    pts = (lo,) if n == 1 else tuple(np.linspace(lo, hi, n))
    return BimoduleSpace("CGrid", (n,), True, grid=pts)


def l1_trace(n: int) -> BimoduleSpace:
    _check_dim(n)
    return BimoduleSpace("L1Trace", (n, n), True)


def dual_vn(n: int) -> BimoduleSpace:
    _check_dim(n)
    return BimoduleSpace("DualVN", (n, n), True)


def bcc(m: int, k: int) -> BimoduleSpace:
    _check_dim(m)
    _check_dim(k)
    return BimoduleSpace("BCC", (k, m), True)


def seq_c(n_seq: int, m: int) -> BimoduleSpace:
    _check_dim(n_seq)
    _check_dim(m)
    return BimoduleSpace("SeqC", (n_seq, m), True)


def op_map(domain_kind: str, domain_dim: int, codomain: BimoduleSpace) -> BimoduleSpace:
    if codomain.kind == "OpMap":
        raise ValueError("OpMap codomain may not itself be an OpMap")
    if codomain.kind not in ("L1Trace", "DualVN", "MeasuresFinite", "CGrid", "L2Finite"):
        raise ValueError(f"unsupported OpMap codomain kind {codomain.kind!r}")
    dom = OpDomain(domain_kind, domain_dim)
    tail = (domain_dim, domain_dim) if domain_kind == "vn" else (domain_dim,)
    return BimoduleSpace("OpMap", codomain.shape + tail, False,
                         domain=dom, codomain=codomain)


def _check_dim(n):
    if int(n) < 1:
        raise ValueError("dimension must be >= 1")


def _as_grid(grid):
    return None if grid is None else tuple(float(g) for g in grid)


@dataclass(frozen=True)
class BimoduleElement:
    space: BimoduleSpace
    coords: np.ndarray = field(compare=False)

    def __add__(self, other):
        _same_space(self, other)
        return BimoduleElement(self.space, self.coords + other.coords)

    def __sub__(self, other):
        _same_space(self, other)
        return BimoduleElement(self.space, self.coords - other.coords)

    def __rmul__(self, scalar):
        return BimoduleElement(self.space, complex(scalar) * self.coords)

    __mul__ = __rmul__

    def __neg__(self):
        return BimoduleElement(self.space, -self.coords)


def _same_space(a, b):
    if a.space != b.space:
        raise ShapeError("elements live in different spaces")


def element(space: BimoduleSpace, coords) -> BimoduleElement:
    """Wrap coordinates as an element of ``space``, validating shape and finiteness."""
    arr = np.asarray(coords, dtype=np.complex128)
    if arr.shape != space.shape:
        raise ShapeError(f"coords shape {arr.shape} != space shape {space.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("coords contain NaN/Inf")
    return BimoduleElement(space, arr)


def zero(space: BimoduleSpace) -> BimoduleElement:
    return BimoduleElement(space, np.zeros(space.shape, dtype=np.complex128))


def _coords_of(y):
    return y.coords if isinstance(y, BimoduleElement) else np.asarray(y, dtype=np.complex128)


def _tol_scale(coords) -> float:
    return max(1.0, float(np.linalg.norm(coords.ravel())))


# ---------------------------------------------------------------------------
# cone membership
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeResult:
    ok: bool
    verdict: str  # in-cone-exact | no-counterexample | out-of-cone
    witness: object = None

    def __bool__(self):
        return self.ok


def cone_contains(space: BimoduleSpace, y, tol: float = 1e-10,
                  trials: int = 256, seed: int = 0) -> ConeResult:
    """Test membership of y in the positive cone of ``space``.

    Exact for every kind except OpMap with a von Neumann domain and a matrix
    codomain, where the verdict is a trichotomy: ``in-cone-exact`` when the
    Choi matrix of the map is PSD (a sufficient certificate), ``out-of-cone``
    with a rank-one input witness, or ``no-counterexample`` after ``trials``
    sampled rank-one PSD inputs.
    """
    c = _coords_of(y)
    if c.shape != space.shape:
        raise ShapeError(f"coords shape {c.shape} != space shape {space.shape}")
    s = _tol_scale(c)
    if space.kind in ENTRYWISE_KINDS:
        bad = (c.real < -tol * s) | (np.abs(c.imag) > tol * s)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            return ConeResult(False, "out-of-cone", idx)
        return ConeResult(True, "in-cone-exact")
    if space.kind in MATRIX_KINDS:
        return _psd_result(c, tol, s)
    return _opmap_cone(space, c, tol, s, trials, seed)


def _psd_result(m, tol, s):
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > tol * s * 10:
        return ConeResult(False, "out-of-cone", "not-hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    if w[0] < -tol * s:
        return ConeResult(False, "out-of-cone", v[:, 0].copy())
    return ConeResult(True, "in-cone-exact")


def _opmap_cone(space, c, tol, s, trials, seed):
    dom, cod = space.domain, space.codomain
    if dom.kind == "comm":
        # cone of the commutative domain is generated by the coordinate basis
        for r in range(dom.dim):
            res = cone_contains(cod, c[..., r], tol)
            if not res.ok:
                return ConeResult(False, "out-of-cone", ("basis", r, res.witness))
        return ConeResult(True, "in-cone-exact")
    p = dom.dim
    if cod.kind in ("CGrid", "L2Finite", "MeasuresFinite"):
        # L(vv*) >= 0 entrywise for all v  <=>  each p x p coordinate slice PSD
        mats = c.reshape(-1, p, p)
        mt = np.swapaxes(mats, -1, -2)
        herm = float(np.max(np.abs(mats - mt.conj())))
        flat = 0.5 * (mats + mt.conj())
        w, v = np.linalg.eigh(flat)
        if herm > tol * s * 10 or w[:, 0].min() < -tol * s:
            t = int(np.argmin(w[:, 0]))
            vec = v[t, :, 0].conj()  # L(vv*)(t) = w* M_t^T w with w = conj(v)
            return ConeResult(False, "out-of-cone", ("rank-one", vec))
        return ConeResult(True, "in-cone-exact")
    # matrix codomain: Choi PSD is sufficient, otherwise sample rank-one inputs
    n = cod.shape[0]
    choi = np.transpose(c, (2, 0, 3, 1)).reshape(p * n, p * n)
    cw = np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))
    choi_herm = float(np.max(np.abs(choi - choi.conj().T)))
    if cw[0] >= -tol * s and choi_herm <= tol * s * 10:
        return ConeResult(True, "in-cone-exact")
    rng = np.random.default_rng(seed)
    vs = rng.standard_normal((trials, p)) + 1j * rng.standard_normal((trials, p))
    vs /= np.linalg.norm(vs, axis=1)[:, None]
    imgs = np.einsum("abrs,tr,ts->tab", c, vs, vs.conj())
    iw = np.linalg.eigvalsh(0.5 * (imgs + np.swapaxes(imgs, -1, -2).conj()))
    ih = np.abs(imgs - np.swapaxes(imgs, -1, -2).conj()).max(axis=(1, 2))
    bad = (iw[:, 0] < -tol * s) | (ih > tol * s * 10)
    if bad.any():
        t = int(np.argmax(bad))
        return ConeResult(False, "out-of-cone", ("rank-one", vs[t].copy()))
    return ConeResult(True, "no-counterexample")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormResult:
    value: float
    method: str  # exact | witness

    def __float__(self):
        return self.value


def norm(space: BimoduleSpace, y, assume_cone: bool = False,
         witnesses: np.ndarray | None = None,
         witness_seed: int = OPMAP_WITNESS_SEED) -> NormResult:
    """Norm of y with a method tag.

    Exact for every kind except OpMap; for OpMap the value is exact (codomain
    norm of the image of the domain unit) when y is in the cone or
    ``assume_cone`` is set, otherwise a witness supremum, i.e. a certified
    lower bound of the operator norm.
    """
    c = _coords_of(y)
    if space.kind != "OpMap":
        return NormResult(float(norms_batch(space, c[None])[0]), "exact")
    if assume_cone or cone_contains(space, c).ok:
        img = apply_opmap(space, c[None], domain_unit(space))[0]
        return NormResult(float(norms_batch(space.codomain, img[None])[0]), "exact")
    if witnesses is None:
        rng = np.random.default_rng(witness_seed)
        witnesses = opmap_witnesses(space, rng, OPMAP_WITNESS_UNITARIES,
                                    OPMAP_WITNESS_CONTRACTIONS)
    return NormResult(float(opmap_witness_norms(space, c[None], witnesses)[0]), "witness")


def norms_batch(space: BimoduleSpace, coords: np.ndarray,
                assume_cone: bool = False,
                witnesses: np.ndarray | None = None) -> np.ndarray:
    """Vectorized norms of a (B, *space.shape) stack of coordinates.

    For OpMap: the exact cone formula when ``assume_cone``, else the witness
    supremum over ``witnesses`` plus the domain unit.
    """
    kind = space.kind
    if kind == "L2Finite":
        return np.linalg.norm(coords.reshape(len(coords), -1), axis=1)
    if kind == "MeasuresFinite":
        return np.abs(coords).sum(axis=1)
    if kind == "CGrid":
        return np.abs(coords).max(axis=1)
    if kind == "SeqC":
        return np.sqrt((np.abs(coords) ** 2).sum(axis=1)).max(axis=1)
    if kind == "BCC":
        return np.abs(coords).sum(axis=2).max(axis=1)
    if kind in MATRIX_KINDS:
        return np.linalg.svd(coords, compute_uv=False).sum(axis=1)
    if assume_cone:
        imgs = apply_opmap(space, coords, domain_unit(space))
        return norms_batch(space.codomain, imgs)
    if witnesses is None:
        rng = np.random.default_rng(OPMAP_WITNESS_SEED)
        witnesses = opmap_witnesses(space, rng, OPMAP_WITNESS_UNITARIES,
                                    OPMAP_WITNESS_CONTRACTIONS)
    return opmap_witness_norms(space, coords, witnesses)


def domain_unit(space: BimoduleSpace) -> np.ndarray:
    dom = space.domain
    if dom.kind == "vn":
        return np.eye(dom.dim, dtype=np.complex128)
    return np.ones(dom.dim, dtype=np.complex128)


def apply_opmap(space: BimoduleSpace, coords: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply a (B, *shape) stack of OpMap elements to one domain element a."""
    if space.domain.kind == "vn":
        if a.shape != (space.domain.dim,) * 2:
            raise ShapeError("domain element has wrong shape")
        return np.einsum("b...rs,rs->b...", coords, a)
    if a.shape != (space.domain.dim,):
        raise ShapeError("domain element has wrong shape")
    return np.einsum("b...r,r->b...", coords, a)


def opmap_witnesses(space: BimoduleSpace, rng, n_unitary: int,
                    n_contraction: int) -> np.ndarray:
    """Seeded witness stack in the domain unit ball: unit, unitaries, contractions."""
    dom = space.domain
    p = dom.dim
    if dom.kind == "vn":
        ws = [np.eye(p, dtype=np.complex128)[None]]
        if n_unitary:
            ws.append(_haar_unitaries(rng, n_unitary, p))
        if n_contraction:
            g = rng.standard_normal((n_contraction, p, p)) \
                + 1j * rng.standard_normal((n_contraction, p, p))
            top = np.linalg.svd(g, compute_uv=False)[:, 0]
            scale = rng.uniform(0.1, 1.0, n_contraction) / top
            ws.append(g * scale[:, None, None])
        return np.concatenate(ws, axis=0)
    ws = [np.ones((1, p), dtype=np.complex128)]
    if n_unitary:
        ws.append(np.exp(2j * np.pi * rng.uniform(size=(n_unitary, p))))
    if n_contraction:
        mag = rng.uniform(size=(n_contraction, p))
        ws.append(mag * np.exp(2j * np.pi * rng.uniform(size=(n_contraction, p))))
    return np.concatenate(ws, axis=0)


def _haar_unitaries(rng, n, p):
    g = rng.standard_normal((n, p, p)) + 1j * rng.standard_normal((n, p, p))
    q, r = np.linalg.qr(g)
    d = np.einsum("nii->ni", r)
    return q * (d / np.abs(d))[:, None, :]


def opmap_witness_norms(space: BimoduleSpace, coords: np.ndarray,
                        witnesses: np.ndarray) -> np.ndarray:
    """max over witnesses of the codomain norm of the image; a lower bound."""
    cod = space.codomain
    b = len(coords)
    if space.domain.kind == "vn":
        imgs = np.einsum("b...rs,wrs->bw...", coords, witnesses)
    else:
        imgs = np.einsum("b...r,wr->bw...", coords, witnesses)
    flat = imgs.reshape((b * len(witnesses),) + cod.shape)
    return norms_batch(cod, flat).reshape(b, len(witnesses)).max(axis=1)


# ---------------------------------------------------------------------------
# involution and module action
# ---------------------------------------------------------------------------

def adjoint_coords(space: BimoduleSpace, coords: np.ndarray, batch_ndim: int = 0) -> np.ndarray:
    """Involution on a coordinate array with ``batch_ndim`` leading batch axes."""
    if space.kind in ENTRYWISE_KINDS:
        return coords.conj()
    nb = batch_ndim
    if space.kind in MATRIX_KINDS:
        return np.swapaxes(coords, nb, nb + 1).conj()
    # OpMap: L*(A) = (L(A*))^{*cod}
    cod = space.codomain
    ncod = len(cod.shape)
    out = coords
    if cod.kind in MATRIX_KINDS:
        out = np.swapaxes(out, nb, nb + 1)
    if space.domain.kind == "vn":
        out = np.swapaxes(out, nb + ncod, nb + ncod + 1)
    return out.conj()


def adjoint_element(space: BimoduleSpace, y) -> BimoduleElement:
    return BimoduleElement(space, adjoint_coords(space, _coords_of(y)))


def sandwich(space: BimoduleSpace, z, y) -> BimoduleElement:
    """z* y z through the module action of Y0; maps the cone into itself."""
    c = _coords_of(y)
    z = np.asarray(z, dtype=np.complex128)
    kind = space.kind
    if kind in ("L2Finite", "MeasuresFinite", "CGrid"):
        if z.shape != space.shape:
            raise ShapeError("Y0 element must be a function on the same points")
        return BimoduleElement(space, np.abs(z) ** 2 * c)
    if kind == "SeqC":
        if z.shape != space.shape:
            raise ShapeError("Y0 element of SeqC is an (N, m) array")
        return BimoduleElement(space, np.abs(z) ** 2 * c)
    if kind == "BCC":
        m = space.shape[1]
        if z.shape != (m,):
            raise ShapeError("Y0 element of BCC is a function on the domain points")
        return BimoduleElement(space, c * (np.abs(z) ** 2)[None, :])
    if kind in MATRIX_KINDS:
        n = space.shape[0]
        if z.shape != (n, n):
            raise ShapeError("Y0 element must be an n x n matrix")
        return BimoduleElement(space, z.conj().T @ c @ z)
    dom = space.domain
    if dom.kind == "vn":
        if z.shape != (dom.dim,) * 2:
            raise ShapeError("Y0 element must act on the OpMap domain")
        out = np.einsum("...rs,ra,sb->...ab", c, z, z.conj())
    else:
        if z.shape != (dom.dim,):
            raise ShapeError("Y0 element must act on the OpMap domain")
        out = c * (np.abs(z) ** 2)
    return BimoduleElement(space, out)


# ---------------------------------------------------------------------------
# positive functional / multiplier pairing (used by the operator-map
# Cauchy-Schwarz intermediate inequality)
# ---------------------------------------------------------------------------

def positive_functional(space: BimoduleSpace, coords: np.ndarray) -> np.ndarray:
    """A faithful positive linear functional on batched coordinates (B, *shape):
    trace for matrix kinds, total mass / grid sum for function kinds."""
    if space.kind in MATRIX_KINDS:
        return np.einsum("bii->b", coords)
    if space.kind in ("MeasuresFinite", "CGrid", "L2Finite"):
        return coords.sum(axis=1)
    raise ValueError(f"no canonical functional for kind {space.kind}")


def multiplier_pair(space: BimoduleSpace, mult: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Pair batched coordinates with a bounded multiplier: tr(T y) for matrix
    kinds, sum(g * y) for function kinds."""
    if space.kind in MATRIX_KINDS:
        return np.einsum("ij,bji->b", mult, coords)
    if space.kind in ("MeasuresFinite", "CGrid", "L2Finite"):
        return np.einsum("j,bj->b", mult, coords)
    raise ValueError(f"no multiplier pairing for kind {space.kind}")


def codomain_multipliers(space: BimoduleSpace, rng, n: int) -> np.ndarray:
    """Contractions pairing with ``space``: ||T||_op <= 1 matrices or |g| <= 1
    functions."""
    if space.kind in MATRIX_KINDS:
        k = space.shape[0]
        g = rng.standard_normal((n, k, k)) + 1j * rng.standard_normal((n, k, k))
        return g / np.linalg.svd(g, compute_uv=False)[:, 0][:, None, None]
    k = space.shape[0]
    mag = rng.uniform(size=(n, k))
    return mag * np.exp(2j * np.pi * rng.uniform(size=(n, k)))


# ---------------------------------------------------------------------------
# coordinate upper bound on the norm (used for declared boundedness constants)
# ---------------------------------------------------------------------------

def coord_norm_bound(space: BimoduleSpace, coords: np.ndarray) -> float:
    """A cheap true upper bound of ||y|| from |coords| (l1-style, loose)."""
    total = float(np.abs(coords).sum())
    if space.kind in MATRIX_KINDS:
        return np.sqrt(space.shape[0]) * float(np.linalg.norm(coords))
    if space.kind == "OpMap":
        cod = space.codomain
        ncod = len(cod.shape)
        per = np.abs(coords).sum(axis=tuple(range(ncod, coords.ndim)))
        return coord_norm_bound(cod, per)
    return total


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def random_element(space: BimoduleSpace, rng) -> BimoduleElement:
    c = rng.standard_normal(space.shape) + 1j * rng.standard_normal(space.shape)
    return BimoduleElement(space, c)


def random_cone_element(space: BimoduleSpace, rng, rank: int = 2) -> BimoduleElement:
    """A sample from the positive cone (never on the boundary issues aside)."""
    kind = space.kind
    if kind in ENTRYWISE_KINDS:
        return BimoduleElement(space, np.abs(rng.standard_normal(space.shape))
                               .astype(np.complex128))
    if kind in MATRIX_KINDS:
        n = space.shape[0]
        g = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
        return BimoduleElement(space, (g @ g.conj().T) / rank)
    dom, cod = space.domain, space.codomain
    if dom.kind == "comm":
        cols = [random_cone_element(cod, rng, rank).coords for _ in range(dom.dim)]
        return BimoduleElement(space, np.stack(cols, axis=-1))
    p = dom.dim
    if cod.kind in MATRIX_KINDS:
        n = cod.shape[0]
        ks = rng.standard_normal((rank, n, p)) + 1j * rng.standard_normal((rank, n, p))
        coords = np.einsum("qar,qbs->abrs", ks, ks.conj()) / rank
    else:
        t = space.shape[:len(cod.shape)]
        us = rng.standard_normal((rank,) + t + (p,)) + 1j * rng.standard_normal((rank,) + t + (p,))
        coords = np.einsum("q...r,q...s->...rs", us.conj(), us) / rank
    return BimoduleElement(space, coords)


def random_y0(space: BimoduleSpace, rng) -> np.ndarray:
    """A sample from the acting algebra Y0 of ``space``."""
    kind = space.kind
    if kind in ("L2Finite", "MeasuresFinite", "CGrid", "SeqC"):
        shape = space.shape
    elif kind == "BCC":
        shape = (space.shape[1],)
    elif kind in MATRIX_KINDS:
        shape = space.shape
    else:
        dom = space.domain
        shape = (dom.dim, dom.dim) if dom.kind == "vn" else (dom.dim,)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# ---------------------------------------------------------------------------
# order-preservation check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderPreservingReport:
    trials: int
    seed: int
    max_margin: float
    passed: bool


def check_order_preserving(space: BimoduleSpace, trials: int = 1000,
                           tol: float = 1e-12, seed: int = 0) -> OrderPreservingReport:
    """Sample cone pairs y1 <= y2 = y1 + k and check ||y1|| <= ||y2|| (1 + tol)."""
    if not space.order_preserving:
        raise ValueError(f"{space.kind} is not flagged order-preserving")
    rng = np.random.default_rng(seed)
    y1 = np.stack([random_cone_element(space, rng).coords for _ in range(trials)])
    k = np.stack([random_cone_element(space, rng).coords for _ in range(trials)])
    n1 = norms_batch(space, y1, assume_cone=True)
    n2 = norms_batch(space, y1 + k, assume_cone=True)
    margin = float((n1 - n2 * (1 + tol)).max())
    return OrderPreservingReport(trials, seed, margin, margin <= 0.0)
