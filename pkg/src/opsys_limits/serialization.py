"""JSON encodings for matrices, systems, maps, sequences, elements and certificates.

Every parser takes the path of the object it is reading and raises
:class:`InputError` naming the offending field, e.g. ``connect[1].images[3].re``.
"""

from __future__ import annotations

import json
from enum import Enum
from typing import Any

import numpy as np

from .errors import InputError, OperatorSystemError
from .indlimit import InductiveSequence, LimitElement, canonical_injection
from .opsys import ConcreteOperatorSystem, new_concrete
from .tensor import MaxCertificate
from .ucp import LinearMap


def _clean(x: float) -> float:
    # -0.0 and 0.0 print differently
    x = float(x)
    return 0.0 if x == 0 else x


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise ValueError("only 2-d arrays are encoded")
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [_clean(v) for v in m.real.reshape(-1)],
        "im": [_clean(v) for v in m.imag.reshape(-1)],
    }


def _field(obj, key: str, path: str):
    if not isinstance(obj, dict):
        raise InputError(path, "expected an object")
    if key not in obj:
        raise InputError(f"{path}.{key}" if path else key, "missing field")
    return obj[key]


def _join(path: str, key) -> str:
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _int(obj, key: str, path: str, minimum: int | None = None) -> int:
    v = _field(obj, key, path)
    p = _join(path, key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(p, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise InputError(p, f"must be >= {minimum}")
    return v


def _list(obj, key: str, path: str) -> list:
    v = _field(obj, key, path)
    if not isinstance(v, list):
        raise InputError(_join(path, key), "expected a list")
    return v


def matrix_from_json(obj, path: str = "matrix") -> np.ndarray:
    rows = _int(obj, "rows", path, 1)
    cols = _int(obj, "cols", path, 1)
    parts = []
    for key in ("re", "im"):
        vals = _list(obj, key, path) if key == "re" or key in obj else [0.0] * rows * cols
        if len(vals) != rows * cols:
            raise InputError(_join(path, key), f"expected {rows * cols} entries, got {len(vals)}")
        for i, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                raise InputError(f"{_join(path, key)}[{i}]", f"expected a finite number, got {v!r}")
        parts.append(np.array(vals, dtype=float).reshape(rows, cols))
    return parts[0] + 1j * parts[1]


def system_to_json(S: ConcreteOperatorSystem) -> dict:
    return {"ambient_dim": S.ambient_dim, "name": S.name, "basis": [matrix_to_json(b) for b in S.basis]}


def system_from_json(obj, path: str = "system") -> ConcreteOperatorSystem:
    d = _int(obj, "ambient_dim", path, 1)
    name = obj.get("name", "") if isinstance(obj, dict) else ""
    if not isinstance(name, str):
        raise InputError(_join(path, "name"), "expected a string")
    basis = [
        matrix_from_json(b, f"{_join(path, 'basis')}[{i}]") for i, b in enumerate(_list(obj, "basis", path))
    ]
    try:
        return new_concrete(d, basis, name)
    except OperatorSystemError as exc:
        raise InputError(_join(path, "basis"), str(exc)) from exc


def systems_from_json(obj, path: str = "") -> dict[str, ConcreteOperatorSystem]:
    """A single system, a list of systems, or ``{"systems": [...]}``, keyed by name."""
    if isinstance(obj, dict) and "systems" in obj:
        items, base = _list(obj, "systems", path), _join(path, "systems")
    elif isinstance(obj, list):
        items, base = obj, path
    else:
        items, base = [obj], None
    out: dict[str, ConcreteOperatorSystem] = {}
    for i, item in enumerate(items):
        p = path or "system" if base is None else f"{base}[{i}]"
        S = system_from_json(item, p)
        if S.name in out:
            raise InputError(_join(p, "name"), f"duplicate system name {S.name!r}")
        out[S.name] = S
    return out


def map_to_json(f: LinearMap) -> dict:
    return {
        "domain": f.domain.name,
        "codomain": f.codomain.name,
        "images": [matrix_to_json(m) for m in f.images],
    }


def _system_ref(obj, key: str, path: str, systems: dict) -> ConcreteOperatorSystem:
    ref = _field(obj, key, path)
    if not isinstance(ref, str) or ref not in systems:
        raise InputError(_join(path, key), f"unknown system {ref!r}")
    return systems[ref]


def _map_between(obj, dom: ConcreteOperatorSystem, cod: ConcreteOperatorSystem, path: str) -> LinearMap:
    imgs = [
        matrix_from_json(m, f"{_join(path, 'images')}[{i}]") for i, m in enumerate(_list(obj, "images", path))
    ]
    try:
        return LinearMap(dom, cod, imgs, name=obj.get("name", ""))
    except OperatorSystemError as exc:
        raise InputError(_join(path, "images"), str(exc)) from exc


def map_from_json(obj, systems: dict[str, ConcreteOperatorSystem], path: str = "map") -> LinearMap:
    dom = _system_ref(obj, "domain", path, systems)
    cod = _system_ref(obj, "codomain", path, systems)
    return _map_between(obj, dom, cod, path)


def sequence_from_json(obj, path: str = "sequence", depth: int | None = None) -> InductiveSequence:
    """Explicit sequences list their systems and maps; UHF ones only ``gamma``."""
    from .uhf import GammaRule, uhf_sequence

    kind = _field(obj, "kind", path)
    if kind == "uhf":
        gamma = _list(obj, "gamma", path)
        if not gamma or any(isinstance(g, bool) or not isinstance(g, int) or g < 1 for g in gamma):
            raise InputError(_join(path, "gamma"), "expected a nonempty list of integers >= 1")
        if depth is None:
            depth = _int(obj, "depth", path, 1) if "depth" in obj else len(gamma)
        try:
            return uhf_sequence(GammaRule(tuple(gamma)), depth)
        except OperatorSystemError as exc:
            raise InputError(_join(path, "depth"), str(exc)) from exc
    if kind != "explicit":
        raise InputError(_join(path, "kind"), f"expected 'explicit' or 'uhf', got {kind!r}")
    systems_raw = _list(obj, "systems", path)
    systems = [system_from_json(s, f"{_join(path, 'systems')}[{i}]") for i, s in enumerate(systems_raw)]
    connect_raw = _list(obj, "connect", path)
    if len(connect_raw) != len(systems) - 1:
        raise InputError(_join(path, "connect"), f"{len(systems)} systems need {len(systems) - 1} maps")
    maps = []
    for i, m in enumerate(connect_raw):
        p = f"{_join(path, 'connect')}[{i}]"
        # stages may share names, so maps bind by position and the names are only checked
        for key, S in (("domain", systems[i]), ("codomain", systems[i + 1])):
            if _field(m, key, p) != S.name:
                raise InputError(_join(p, key), f"expected {S.name!r} (stage {i + 1 + (key == 'codomain')})")
        maps.append(_map_between(m, systems[i], systems[i + 1], p))
    n = _int(obj, "depth", path, 1) if "depth" in obj else len(systems)
    if depth is not None:
        n = depth
    if n > len(systems):
        raise InputError(_join(path, "depth"), f"depth {n} exceeds the {len(systems)} listed systems")
    inclusion = obj.get("inclusion", False)
    if not isinstance(inclusion, bool):
        raise InputError(_join(path, "inclusion"), "expected a boolean")
    return InductiveSequence.explicit(systems[:n], maps[: n - 1], inclusion=inclusion, name=obj.get("name", ""))


def element_to_json(e: LimitElement) -> dict:
    return {"stage": e.stage, "level": e.level, "rep": matrix_to_json(e.rep)}


def element_from_json(obj, path: str = "element", seq: InductiveSequence | None = None) -> LimitElement:
    """``{"stage": k, "rep": Matrix}``; with ``seq`` the level is inferred and membership checked."""
    stage = _int(obj, "stage", path, 1)
    rep = matrix_from_json(_field(obj, "rep", path), _join(path, "rep"))
    if seq is None:
        level = _int(obj, "level", path, 1) if "level" in obj else 1
        return LimitElement(stage, rep, level)
    try:
        return canonical_injection(seq, stage, rep)
    except OperatorSystemError as exc:
        raise InputError(_join(path, "rep"), str(exc)) from exc


def certificate_from_json(obj, path: str = "certificate") -> MaxCertificate:
    alpha = matrix_from_json(_field(obj, "alpha", path), _join(path, "alpha"))
    P = matrix_from_json(_field(obj, "P", path), _join(path, "P"))
    Q = matrix_from_json(_field(obj, "Q", path), _join(path, "Q"))
    eps = _field(obj, "epsilon", path)
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or eps < 0:
        raise InputError(_join(path, "epsilon"), "expected a nonnegative number")
    return MaxCertificate(alpha, P, Q, _int(obj, "l", path, 1), _int(obj, "m", path, 1), float(eps))


def _default(o: Any):
    if isinstance(o, Enum):
        return o.value
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return _clean(o)
    if isinstance(o, (tuple, set)):
        return list(o)
    if hasattr(o, "to_json"):
        return o.to_json()
    raise TypeError(f"cannot encode {type(o).__name__}")


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=False) + "\n"


def load(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(path, f"cannot read file: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(path, f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def witness_to_json(w) -> dict | None:
    if w is None:
        return None
    return {
        "level": w.level,
        "element": matrix_to_json(w.element),
        "image_min_eigenvalue": w.image_min_eigenvalue,
        "input_min_eigenvalue": w.input_min_eigenvalue,
        "direction": w.direction,
    }


def cp_verdict_to_json(v) -> dict:
    return {
        "status": v.status.value,
        "checked_level": v.checked_level,
        "unital": v.unital,
        "exact": v.exact,
        "witness": witness_to_json(v.witness),
        "detail": v.detail,
    }
