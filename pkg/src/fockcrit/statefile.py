"""JSON state files read by the command line.

Every document is an object with a ``kind`` field::

    {"kind": "binomial", "N": 200}
    {"kind": "fock_product", "n": 3, "m": 2}
    {"kind": "coherent_product", "alpha": [1.0, 0.0], "c": 1.0, "leakage_tol": 1e-12}
    {"kind": "cat", "N": 10}
    {"kind": "custom_two_mode", "entries": [[0, 1, 0.7071, 0.0], [1, 0, 0.7071, 0.0]],
     "normalize": false}
    {"kind": "separable_ensemble",
     "components": [{"weight": 0.5, "a": [1.0], "b": [0.0, [0.0, 1.0]]}, ...]}

Complex numbers are written either as a real number or as ``[re, im]``.
Amplitude lists start at n = 0.  ``custom_two_mode`` entries are
``(n, m, re, im)``; repeated (n, m) pairs are an error.  ``normalize``
(default false) rescales the state instead of rejecting an unnormalized one.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import CapacityError, DomainError, SchemaError, ValidationError
from .fock import (MAX_CUTOFF, ProductComponent, SeparableEnsemble, SingleModeState, TwoModeState,
                   make_binomial_state, make_cat_state, make_coherent_product, make_fock_product)

KINDS = ("binomial", "fock_product", "coherent_product", "cat", "custom_two_mode", "separable_ensemble")

_ALLOWED = {
    "binomial": {"N"},
    "fock_product": {"n", "m"},
    "coherent_product": {"alpha", "c", "leakage_tol"},
    "cat": {"N"},
    "custom_two_mode": {"entries", "normalize"},
    "separable_ensemble": {"components", "normalize"},
}


def _nonneg_int(doc, key, positive=False):
    if key not in doc:
        raise SchemaError(f"missing field {key!r}")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not float(v).is_integer():
        raise SchemaError(f"field {key!r} must be an integer, got {v!r}")
    v = int(v)
    if v < 0 or (positive and v == 0):
        raise SchemaError(f"field {key!r} must be {'positive' if positive else 'non-negative'}, got {v}")
    return v


def _real(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where} must be a finite number, got {v!r}")
    return float(v)


def _complex(v, where):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise SchemaError(f"{where} must be a number or [re, im], got {v!r}")
        return complex(_real(v[0], where), _real(v[1], where))
    return complex(_real(v, where), 0.0)


def _amplitudes(v, where):
    if not isinstance(v, list) or not v:
        raise SchemaError(f"{where} must be a non-empty list of amplitudes")
    if len(v) - 1 > MAX_CUTOFF:
        raise SchemaError(f"{where} exceeds the maximum cutoff {MAX_CUTOFF}")
    return np.array([_complex(x, f"{where}[{i}]") for i, x in enumerate(v)])


def state_from_dict(doc) -> TwoModeState | SeparableEnsemble:
    if not isinstance(doc, dict):
        raise SchemaError("state document must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaError(f"field 'kind' must be one of {', '.join(KINDS)}; got {kind!r}")
    extra = set(doc) - _ALLOWED[kind] - {"kind"}
    if extra:
        raise SchemaError(f"unknown field(s) for kind {kind!r}: {', '.join(sorted(extra))}")
    normalize = doc.get("normalize", False)
    if not isinstance(normalize, bool):
        raise SchemaError("field 'normalize' must be true or false")
    try:
        if kind == "binomial":
            return make_binomial_state(_nonneg_int(doc, "N"))
        if kind == "cat":
            return make_cat_state(_nonneg_int(doc, "N", positive=True))
        if kind == "fock_product":
            return make_fock_product(_nonneg_int(doc, "n"), _nonneg_int(doc, "m"))
        if kind == "coherent_product":
            for key in ("alpha", "c"):
                if key not in doc:
                    raise SchemaError(f"missing field {key!r}")
            tol = _real(doc.get("leakage_tol", 1e-12), "field 'leakage_tol'")
            if tol <= 0:
                raise SchemaError("field 'leakage_tol' must be positive")
            return make_coherent_product(_complex(doc["alpha"], "field 'alpha'"),
                                         _complex(doc["c"], "field 'c'"), tol)
        if kind == "custom_two_mode":
            return _custom(doc, normalize)
        return _ensemble(doc, normalize)
    except (ValidationError, DomainError, CapacityError) as exc:
        raise SchemaError(f"{kind}: {exc}") from exc


def _custom(doc, normalize):
    entries = doc.get("entries")
    if not isinstance(entries, list) or not entries:
        raise SchemaError("field 'entries' must be a non-empty list of [n, m, re, im]")
    parsed = {}
    for i, e in enumerate(entries):
        if not isinstance(e, (list, tuple)) or len(e) != 4:
            raise SchemaError(f"entries[{i}] must be [n, m, re, im], got {e!r}")
        n = _nonneg_int({"n": e[0]}, "n")
        m = _nonneg_int({"m": e[1]}, "m")
        if (n, m) in parsed:
            raise SchemaError(f"entries[{i}] repeats the index ({n}, {m})")
        parsed[(n, m)] = complex(_real(e[2], f"entries[{i}] re"), _real(e[3], f"entries[{i}] im"))
    ka = max(k[0] for k in parsed)
    kb = max(k[1] for k in parsed)
    if max(ka, kb) > MAX_CUTOFF:
        raise SchemaError(f"entries exceed the maximum cutoff {MAX_CUTOFF}")
    amps = np.zeros((ka + 1, kb + 1), dtype=complex)
    for (n, m), v in parsed.items():
        amps[n, m] = v
    state = TwoModeState(amps)
    if normalize:
        return state.normalized()
    if not state.is_normalized():
        raise SchemaError(f"entries: state not normalized (norm^2 = {state.norm ** 2:.15g}); "
                          "set \"normalize\": true to rescale")
    return state


def _ensemble(doc, normalize):
    comps = doc.get("components")
    if not isinstance(comps, list) or not comps:
        raise SchemaError("field 'components' must be a non-empty list")
    out = []
    for i, comp in enumerate(comps):
        if not isinstance(comp, dict):
            raise SchemaError(f"components[{i}] must be an object")
        extra = set(comp) - {"weight", "a", "b"}
        if extra:
            raise SchemaError(f"components[{i}] has unknown field(s): {', '.join(sorted(extra))}")
        for key in ("weight", "a", "b"):
            if key not in comp:
                raise SchemaError(f"components[{i}] is missing field {key!r}")
        w = _real(comp["weight"], f"components[{i}].weight")
        if w < 0:
            raise SchemaError(f"components[{i}].weight must be non-negative")
        sa = SingleModeState(_amplitudes(comp["a"], f"components[{i}].a"))
        sb = SingleModeState(_amplitudes(comp["b"], f"components[{i}].b"))
        if normalize:
            sa, sb = sa.normalized(), sb.normalized()
        out.append(ProductComponent(w, sa, sb))
    if normalize:
        total = math.fsum(c.weight for c in out)
        out = [ProductComponent(c.weight / total, c.state_a, c.state_b) for c in out]
    ens = SeparableEnsemble(tuple(out))
    ens.validate()
    return ens


def load_state(path) -> TwoModeState | SeparableEnsemble:
    """Read a state file; OSError propagates, malformed content raises SchemaError."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return state_from_dict(doc)


def _cplx(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def state_to_dict(obj: TwoModeState | SeparableEnsemble) -> dict:
    """Explicit-amplitude document that round-trips through :func:`state_from_dict`."""
    if isinstance(obj, SeparableEnsemble):
        return {"kind": "separable_ensemble", "components": [
            {"weight": c.weight, "a": [_cplx(z) for z in c.state_a.amps], "b": [_cplx(z) for z in c.state_b.amps]}
            for c in obj.components]}
    nz = np.argwhere(obj.amps != 0)
    return {"kind": "custom_two_mode", "entries": [
        [int(n), int(m), float(obj.amps[n, m].real), float(obj.amps[n, m].imag)] for n, m in nz]}
