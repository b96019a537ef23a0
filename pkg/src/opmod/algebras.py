"""Finite-dimensional quasi *-algebras (A, A0) with unit.

An algebra is stored as structure data on coordinates: a d x d x d
multiplication tensor ``mult`` with (a b)_k = sum_ij a_i b_j mult[i, j, k],
a conjugate-linear involution matrix ``invol`` with coords(a*) = invol @
conj(coords(a)), unit coordinates, an A0 membership mask (basis subset), and
two norms.  The quasi-algebra product is partial at the element level: at
least one factor must lie in A0.

Two constructors cover the cases used throughout:

* ``make_matrix_algebra(n, "operator")``  -- A = A0 = M_n with the operator
  norm on both (a genuine C*-algebra, gamma = 1).
* ``make_matrix_algebra(n, "frobenius")`` -- A = M_n with the Frobenius norm
  over A0 = M_n with the operator norm; the A-norm is not submultiplicative
  but ||AC||_F <= ||A||_F ||C||_op, so gamma = 1.  This is the L2-over-L-inf
  pair of a matrix trace.
* ``make_function_algebra(n, p)``         -- diagonal (commutative) algebra
  with the l^p norm over the sup norm.

gamma is stored, not derived; ``check_axioms`` certifies it empirically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QuasiAlgebra:
    dim: int
    labels: tuple
    mult: np.ndarray = field(compare=False)     # (d, d, d)
    invol: np.ndarray = field(compare=False)    # (d, d), conjugate-linear
    unit_coords: np.ndarray = field(compare=False)
    a0_mask: tuple                               # basis subset spanning A0
    norm_kind: str                               # operator | frobenius | lp
    a0_norm_kind: str
    gamma: float
    matrix_dim: int | None = None                # n for matrix algebras
    p: float | None = None                       # for lp norms

    def to_matrix(self, coords):
        if self.matrix_dim is None:
            raise ValueError("not a matrix algebra")
        n = self.matrix_dim
        return np.asarray(coords).reshape(coords.shape[:-1] + (n, n))

    def norm(self, coords) -> float:
        return float(self._norm_of(np.asarray(coords, dtype=np.complex128),
                                   self.norm_kind))

    def norm0(self, coords) -> float:
        return float(self._norm_of(np.asarray(coords, dtype=np.complex128),
                                   self.a0_norm_kind))

    def norms(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized A-norms over a (..., d) stack."""
        return self._norm_of(coords, self.norm_kind)

    def _norm_of(self, coords, kind):
        if kind == "operator":
            return np.linalg.svd(self.to_matrix(coords), compute_uv=False)[..., 0]
        if kind == "frobenius":
            return np.linalg.norm(coords, axis=-1)
        if kind == "lp":
            if np.isinf(self.p):
                return np.abs(coords).max(axis=-1)
            return (np.abs(coords) ** self.p).sum(axis=-1) ** (1.0 / self.p)
        raise ValueError(f"unknown norm kind {kind!r}")

    def star(self, coords: np.ndarray) -> np.ndarray:
        return self.invol @ np.conj(coords)

    def product(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("i,j,ijk->k", x, y, self.mult)

    def left_mult_matrix(self, coords: np.ndarray) -> np.ndarray:
        """L with (a b)-coords = L @ b-coords."""
        return np.einsum("i,ijk->kj", coords, self.mult)

    def a0_basis(self) -> np.ndarray:
        """Columns: coordinate basis of the A0 subspace."""
        cols = np.flatnonzero(np.asarray(self.a0_mask))
        return np.eye(self.dim, dtype=np.complex128)[:, cols]

    def descriptor(self) -> dict:
        return {"dim": self.dim, "norm_kind": self.norm_kind,
                "a0_norm_kind": self.a0_norm_kind, "gamma": self.gamma,
                "matrix_dim": self.matrix_dim, "p": self.p,
                "a0_mask": [bool(b) for b in self.a0_mask]}


@dataclass(frozen=True)
class AlgebraElement:
    algebra: QuasiAlgebra = field(compare=False)
    coords: np.ndarray = field(compare=False)
    in_a0: bool = True

    def __add__(self, other):
        return AlgebraElement(self.algebra, self.coords + other.coords,
                              self.in_a0 and other.in_a0)

    def __rmul__(self, scalar):
        return AlgebraElement(self.algebra, complex(scalar) * self.coords, self.in_a0)

    __mul__ = __rmul__


def make_matrix_algebra(n: int, norm_kind: str = "operator",
                        diagonal_a0: bool = False) -> QuasiAlgebra:
    """The n x n matrix algebra; ``norm_kind`` selects the A-norm.

    ``diagonal_a0`` restricts A0 to the diagonal subalgebra (a stress-test
    configuration; the default is A0 = A as a set).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if norm_kind not in ("operator", "frobenius"):
        raise ValueError(f"unknown norm kind {norm_kind!r}")
    d = n * n
    idx = lambda r, s: r * n + s
    mult = np.zeros((d, d, d))
    invol = np.zeros((d, d))
    for r in range(n):
        for s in range(n):
            invol[idx(s, r), idx(r, s)] = 1.0
            for t in range(n):
                # e_rs e_st = e_rt
                mult[idx(r, s), idx(s, t), idx(r, t)] = 1.0
    unit = np.zeros(d, dtype=np.complex128)
    for r in range(n):
        unit[idx(r, r)] = 1.0
    if diagonal_a0:
        mask = tuple(r == s for r in range(n) for s in range(n))
    else:
        mask = (True,) * d
    labels = tuple(f"E{r}{s}" for r in range(n) for s in range(n))
    return QuasiAlgebra(d, labels, mult, invol.astype(np.complex128), unit, mask,
                        norm_kind, "operator", gamma=1.0, matrix_dim=n)


def make_function_algebra(n: int, p: float = 2.0) -> QuasiAlgebra:
    """Diagonal algebra of functions on n points, l^p norm over sup norm."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mult = np.zeros((n, n, n))
    for i in range(n):
        mult[i, i, i] = 1.0
    invol = np.eye(n, dtype=np.complex128)
    unit = np.ones(n, dtype=np.complex128)
    labels = tuple(f"x{i}" for i in range(n))
    return QuasiAlgebra(n, labels, mult, invol, unit, (True,) * n,
                        "lp", "lp", gamma=1.0, matrix_dim=None, p=float(p))


def unit(algebra: QuasiAlgebra) -> AlgebraElement:
    return AlgebraElement(algebra, algebra.unit_coords.copy(), True)


def basis_element(algebra: QuasiAlgebra, i: int) -> AlgebraElement:
    coords = np.zeros(algebra.dim, dtype=np.complex128)
    coords[i] = 1.0
    return AlgebraElement(algebra, coords, bool(algebra.a0_mask[i]))


def as_element(algebra: QuasiAlgebra, coords, in_a0: bool | None = None) -> AlgebraElement:
    coords = np.asarray(coords, dtype=np.complex128)
    if coords.shape != (algebra.dim,):
        raise ValueError("coordinate length mismatch")
    mask = np.asarray(algebra.a0_mask)
    supported = bool(np.all(np.abs(coords[~mask]) == 0)) if not mask.all() else True
    if in_a0 is None:
        in_a0 = supported
    elif in_a0 and not supported:
        raise ValueError("coords not supported on the A0 mask")
    return AlgebraElement(algebra, coords, in_a0)


def multiply(x: AlgebraElement, y: AlgebraElement) -> AlgebraElement:
    """Module product; defined only when at least one factor lies in A0."""
    if not (x.in_a0 or y.in_a0):
        raise ValueError("quasi-algebra product needs a factor in A0")
    coords = x.algebra.product(x.coords, y.coords)
    return AlgebraElement(x.algebra, coords, x.in_a0 and y.in_a0)


def involution(x: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(x.algebra, x.algebra.star(x.coords), x.in_a0)


@dataclass(frozen=True)
class AxiomReport:
    residuals: dict
    gamma_claimed: float
    gamma_empirical: float
    trials: int
    seed: int
    passed: bool


def check_axioms(algebra: QuasiAlgebra, trials: int = 200, tol: float = 1e-10,
                 seed: int = 0) -> AxiomReport:
    """Verify the algebra invariants on the basis plus random samples.

    Checks: associativity of the module products, (a c)* = c* a*, the unit
    law, isometry of the involution, and the module bound
    max(||ac||, ||ca||) <= gamma ||a|| for unit-A0-norm c.  Failures are
    reported, never raised.
    """
    d = algebra.dim
    mult, invol = algebra.mult, algebra.invol
    mask = np.flatnonzero(np.asarray(algebra.a0_mask))
    res = {}

    # (c a) d = c (a d) and a (c d) = (a c) d over basis triples, c, d in A0
    full_left = np.einsum("iju,ukv->ijkv", mult, mult)   # (i j) k
    full_right = np.einsum("jku,iuv->ijkv", mult, mult)  # i (j k)
    assoc = np.abs(full_left - full_right)
    # c,a,d with c,d in A0: positions (c=i in mask, a=j any, d=k in mask)
    res["assoc_cad"] = float(assoc[np.ix_(mask, range(d), mask)].max())
    # a,c,d with c,d in A0
    res["assoc_acd"] = float(assoc[np.ix_(range(d), mask, mask)].max())

    # (a c)* = c* a* on basis pairs (a any, c in A0)
    ac_star = np.einsum("kl,ijl->ijk", invol, np.conj(mult))
    cstar_astar = np.einsum("uj,vi,uvk->ijk", invol, invol, mult)
    res["star_antihom"] = float(np.abs((ac_star - cstar_astar)[:, mask, :]).max())

    # unit law
    e = algebra.unit_coords
    le = np.einsum("i,ijk->jk", e, mult)
    re_ = np.einsum("j,ijk->ik", e, mult)
    res["unit"] = float(max(np.abs(le - np.eye(d)).max(),
                            np.abs(re_ - np.eye(d)).max()))

    rng = np.random.default_rng(seed)
    a = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    c = rng.standard_normal((trials, d)) + 1j * rng.standard_normal((trials, d))
    c[:, np.asarray(algebra.a0_mask) == False] = 0.0  # noqa: E712

    astar = (invol @ np.conj(a).T).T
    na = algebra.norms(a)
    res["star_isometry"] = float(np.abs(algebra.norms(astar) - na).max()
                                 / max(1.0, na.max()))

    n0 = np.maximum(algebra._norm_of(c, algebra.a0_norm_kind), 1e-30)
    c_unit = c / n0[:, None]
    ac = np.einsum("ti,tj,ijk->tk", a, c_unit, mult)
    ca = np.einsum("ti,tj,ijk->tk", c_unit, a, mult)
    ratios = np.maximum(algebra.norms(ac), algebra.norms(ca)) / np.maximum(na, 1e-30)
    gamma_emp = float(ratios.max())
    res["module_bound"] = max(0.0, gamma_emp - algebra.gamma)

    passed = all(v <= tol for k, v in res.items() if k != "module_bound") \
        and gamma_emp <= algebra.gamma * (1 + 1e-9) + tol
    return AxiomReport(res, algebra.gamma, gamma_emp, trials, seed, passed)
