"""JSON encoding for every artifact: schema ``opmod-v1``.

Complex numbers are two-element arrays [re, im]; coordinate arrays are
row-major nested lists of those pairs, so a decoded array is bit-exact at
double precision (Python's float serialization is shortest-round-trip).
Digests are SHA-256 of canonical JSON: sorted keys, compact separators,
NaN/Inf rejected.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from . import bimodules as bm
from .algebras import QuasiAlgebra
from .bimodules import BimoduleElement, BimoduleSpace, OpDomain
from .forms import SesquiForm, sesqui_form
from .stinespring import CPForm, FiberSpace, StinespringTriple, cp_form

SCHEMA = "opmod-v1"


def encode_array(arr) -> list:
    a = np.asarray(arr, dtype=np.complex128)
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def decode_array(data, shape=None) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError("complex leaves must be [re, im] pairs")
    out = a[..., 0] + 1j * a[..., 1]
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"decoded shape {out.shape} != declared {tuple(shape)}")
    return out


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(obj) -> str:
    text = obj if isinstance(obj, str) else canonical_dumps(obj)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------

def space_to_json(space: BimoduleSpace) -> dict:
    return space.descriptor()


def space_from_json(d: dict) -> BimoduleSpace:
    kind = d["kind"]
    shape = tuple(int(n) for n in d["shape"])
    grid = tuple(float(g) for g in d["grid"]) if d.get("grid") is not None else None
    if kind == "OpMap":
        dom = OpDomain(d["domain"]["kind"], int(d["domain"]["dim"]))
        cod = space_from_json(d["codomain"])
        space = bm.op_map(dom.kind, dom.dim, cod)
    else:
        order = kind != "OpMap"
        space = BimoduleSpace(kind, shape, order, grid=grid)
    if space.shape != shape:
        raise ValueError("inconsistent space descriptor")
    return space


def element_to_json(el: BimoduleElement) -> dict:
    return {"schema": SCHEMA, "space": space_to_json(el.space),
            "coords": encode_array(el.coords)}


def element_from_json(d: dict) -> BimoduleElement:
    space = space_from_json(d["space"])
    return bm.element(space, decode_array(d["coords"], space.shape))


# ---------------------------------------------------------------------------
# algebras
# ---------------------------------------------------------------------------

def algebra_to_json(alg: QuasiAlgebra) -> dict:
    return {
        "schema": SCHEMA,
        "dim": alg.dim,
        "labels": list(alg.labels),
        "structure": encode_array(alg.mult),
        "involution": encode_array(alg.invol),
        "unit": encode_array(alg.unit_coords),
        "a0_mask": [bool(b) for b in alg.a0_mask],
        "norms": {"a": alg.norm_kind, "a0": alg.a0_norm_kind, "p": alg.p},
        "gamma": alg.gamma,
        "matrix_dim": alg.matrix_dim,
    }


def algebra_from_json(d: dict) -> QuasiAlgebra:
    dim = int(d["dim"])
    return QuasiAlgebra(
        dim, tuple(d["labels"]),
        decode_array(d["structure"], (dim, dim, dim)).real,
        decode_array(d["involution"], (dim, dim)),
        decode_array(d["unit"], (dim,)),
        tuple(bool(b) for b in d["a0_mask"]),
        d["norms"]["a"], d["norms"]["a0"], float(d["gamma"]),
        d.get("matrix_dim"), d["norms"].get("p"))


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------

def form_to_json(phi: SesquiForm) -> dict:
    return {
        "schema": SCHEMA,
        "type": "sesquiform",
        "dim": phi.dim,
        "target": space_to_json(phi.target),
        "algebra": None if phi.algebra is None else algebra_to_json(phi.algebra),
        "table": encode_array(phi.coeffs),
    }


def form_from_json(d: dict) -> SesquiForm:
    target = space_from_json(d["target"])
    alg = None if d.get("algebra") is None else algebra_from_json(d["algebra"])
    dim = int(d["dim"])
    coeffs = decode_array(d["table"], (dim, dim) + target.shape)
    return sesqui_form(target, coeffs, alg)


def fiber_to_json(f: FiberSpace) -> dict:
    return f.descriptor()


def fiber_from_json(d: dict) -> FiberSpace:
    return FiberSpace(d["kind"], int(d["dim"]),
                      None if d.get("q") is None else int(d["q"]))


def _meta_to_json(meta: dict) -> dict:
    out = {}
    for k, v in meta.items():
        if isinstance(v, (str, bool, int, float)) or v is None:
            out[k] = v
    return out


def cpform_to_json(cp: CPForm) -> dict:
    return {
        "schema": SCHEMA,
        "type": "cpform",
        "dim": cp.dim,
        "fiber": fiber_to_json(cp.fiber),
        "target": space_to_json(cp.target),
        "algebra": None if cp.algebra is None else algebra_to_json(cp.algebra),
        "table": encode_array(cp.coeffs),
        "bound": cp.bound,
        "meta": _meta_to_json(cp.meta),
    }


def cpform_from_json(d: dict) -> CPForm:
    target = space_from_json(d["target"])
    fiber = fiber_from_json(d["fiber"])
    alg = None if d.get("algebra") is None else algebra_from_json(d["algebra"])
    dim, m = int(d["dim"]), fiber.dim
    coeffs = decode_array(d["table"], (dim, dim, m, m) + target.shape)
    return cp_form(fiber, target, coeffs, alg, d.get("bound"),
                   dict(d.get("meta") or {}))


def triple_to_json(t: StinespringTriple, input_digest: str | None = None,
                   seed: int | None = None) -> dict:
    q = t.quotient
    return {
        "schema": SCHEMA,
        "type": "stinespring-triple",
        "quotient": {
            "ambient_dim": q.ambient_dim,
            "rank": q.rank,
            "lambda": encode_array(q.lam),
            "gram": encode_array(q.gram),
            "kernel": encode_array(q.kernel),
            "target": space_to_json(q.target),
        },
        "rep": encode_array(t.rep),
        "v": encode_array(t.v),
        "bound_m": t.bound_m,
        "bound_method": t.bound_method,
        "e_norm": t.e_norm,
        "v_norm": t.v_norm,
        "v_norm_method": t.v_norm_method,
        "residuals": {k: float(v) for k, v in t.residuals.items()},
        "algebra": algebra_to_json(t.algebra),
        "fiber": fiber_to_json(t.fiber),
        "input_digest": input_digest,
        "seed": seed,
    }


def rn_to_json(rn, input_digests: dict | None = None, seed: int | None = None) -> dict:
    return {
        "schema": SCHEMA,
        "type": "radon-nikodym",
        "t": encode_array(rn.t),
        "gamma": rn.gamma,
        "norm_estimate": rn.norm_estimate,
        "norm_method": rn.norm_method,
        "order_preserving": rn.order_preserving,
        "residuals": {k: float(v) for k, v in rn.residuals.items()},
        "input_digests": input_digests or {},
        "seed": seed,
    }


def load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_dumps(obj))
        fh.write("\n")
