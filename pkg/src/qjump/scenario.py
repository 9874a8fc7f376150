"""JSON scenario parsing and serialization.

Complex numbers are ``[re, im]`` pairs, matrices are row-major nested lists
and a few named operators are accepted (``sigma_x``, ``sigma_y``,
``sigma_z``, ``sigma_plus``, ``sigma_minus``, ``P0``, ``P1``, ``identity``).
Scaled operators are written ``{"scale": s, "matrix": m}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from . import nonhermitian as nh
from .errors import ArgumentError, ModelError, QJumpError
from .pointproc import RenewalLaw
from .qops import (
    IDENTITY2,
    P0,
    P1,
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    JumpChannel,
    JumpModel,
    QuantumChannel,
    as_density,
    pure_state,
)
from .renewal import InterspersedModel, RevivalModel, build_interspersed
from .walk import HybridState, WalkModel, build_walk, two_level_example

SCHEMA_VERSION = "1"

NAMED_MATRICES = {
    "identity": IDENTITY2,
    "sigma_x": SIGMA_X,
    "sigma_y": SIGMA_Y,
    "sigma_z": SIGMA_Z,
    "sigma_plus": SIGMA_PLUS,
    "sigma_minus": SIGMA_MINUS,
    "P0": P0,
    "P1": P1,
}

MODEL_TYPES = ("generic_jump", "effective_nh", "interspersed", "revival", "walk")


class ScenarioError(ArgumentError):
    """Invalid scenario; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --------------------------------------------------------------------------- #
# primitive parsers


def _get(obj: dict, key: str, path: str, default: Any = ...) -> Any:
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    if key not in obj:
        if default is ...:
            raise ScenarioError(f"{path}.{key}", "missing field")
        return default
    return obj[key]


def parse_complex(x: Any, path: str) -> complex:
    if isinstance(x, bool):
        raise ScenarioError(path, "expected a number")
    if isinstance(x, (int, float)):
        return complex(float(x))
    if isinstance(x, list) and len(x) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in x
    ):
        return complex(float(x[0]), float(x[1]))
    raise ScenarioError(path, "expected a number or an [re, im] pair")


def parse_float(x: Any, path: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ScenarioError(path, "expected a real number")
    v = float(x)
    if not math.isfinite(v):
        raise ScenarioError(path, "expected a finite number")
    if positive and v <= 0:
        raise ScenarioError(path, "must be positive")
    if nonneg and v < 0:
        raise ScenarioError(path, "must be non-negative")
    return v


def parse_int(x: Any, path: str, minimum: int | None = None) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ScenarioError(path, "expected an integer")
    if minimum is not None and x < minimum:
        raise ScenarioError(path, f"must be at least {minimum}")
    return int(x)


def parse_matrix(x: Any, path: str, dim: int | None = None) -> NDArray:
    if isinstance(x, str):
        if x not in NAMED_MATRICES:
            raise ScenarioError(path, f"unknown named matrix {x!r}")
        m = NAMED_MATRICES[x].astype(np.complex128)
    elif isinstance(x, dict):
        s = parse_complex(_get(x, "scale", path), f"{path}.scale")
        m = s * parse_matrix(_get(x, "matrix", path), f"{path}.matrix", dim)
    elif isinstance(x, list) and x and all(isinstance(r, list) for r in x):
        rows = [[parse_complex(v, f"{path}[{i}][{j}]") for j, v in enumerate(r)] for i, r in enumerate(x)]
        if any(len(r) != len(rows) for r in rows):
            raise ScenarioError(path, "matrix must be square")
        m = np.array(rows, dtype=np.complex128)
    else:
        raise ScenarioError(path, "expected a matrix (nested list, name or scaled object)")
    if dim is not None and m.shape != (dim, dim):
        raise ScenarioError(path, f"expected a {dim}x{dim} matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def serialize_complex(z: complex) -> Any:
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def serialize_matrix(m: NDArray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, dtype=complex)]


# --------------------------------------------------------------------------- #
# models


def parse_law(x: Any, path: str) -> RenewalLaw:
    kind = _get(x, "kind", path)
    try:
        if kind == "exponential":
            return RenewalLaw.exponential(parse_float(_get(x, "rate", path), f"{path}.rate", positive=True))
        if kind == "erlang2":
            return RenewalLaw.erlang2(parse_float(_get(x, "rate", path), f"{path}.rate", positive=True))
        if kind == "table":
            t = [parse_float(v, f"{path}.t[{i}]", nonneg=True) for i, v in enumerate(_get(x, "t", path))]
            f = [parse_float(v, f"{path}.f[{i}]", nonneg=True) for i, v in enumerate(_get(x, "f", path))]
            return RenewalLaw.table(t, f)
    except (ModelError, ArgumentError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(path, str(exc)) from exc
    raise ScenarioError(f"{path}.kind", f"unknown law kind {kind!r}")


def serialize_law(law: RenewalLaw) -> dict:
    if law.kind == "table":
        return {"kind": "table", "t": [float(v) for v in law.table_t], "f": [float(v) for v in law.table_f]}
    return {"kind": law.kind, "rate": float(law.rate)}


def _model_error(path: str, exc: Exception) -> ScenarioError:
    return ScenarioError(path, str(exc))


def parse_generic(x: dict, path: str) -> JumpModel:
    dim = parse_int(_get(x, "dim", path), f"{path}.dim", 1)
    h = parse_matrix(_get(x, "hamiltonian", path), f"{path}.hamiltonian", dim)
    ls = [parse_matrix(l, f"{path}.lindblads[{i}]", dim) for i, l in enumerate(_get(x, "lindblads", path, []))]
    chans = []
    for i, c in enumerate(_get(x, "channels", path)):
        p = f"{path}.channels[{i}]"
        label = str(_get(c, "label", p))
        rate = parse_float(_get(c, "rate", p), f"{p}.rate", positive=True)
        kraus = [parse_matrix(k, f"{p}.kraus[{j}]", dim) for j, k in enumerate(_get(c, "kraus", p))]
        try:
            chans.append(JumpChannel(label, rate, QuantumChannel(kraus)))
        except QJumpError as exc:
            raise _model_error(p, exc) from exc
    try:
        return JumpModel(h, ls, chans)
    except QJumpError as exc:
        raise _model_error(path, exc) from exc


def serialize_generic(m: JumpModel) -> dict:
    return {
        "type": "generic_jump",
        "dim": m.dim,
        "hamiltonian": serialize_matrix(m.hamiltonian),
        "lindblads": [serialize_matrix(l) for l in m.lindblads],
        "channels": [
            {"label": c.label, "rate": float(c.rate), "kraus": [serialize_matrix(k) for k in c.channel.kraus]}
            for c in m.channels
        ],
    }


@dataclass(frozen=True, eq=False)
class EffectiveNH:
    """Parsed effective non-Hermitian model with its jump-model realization."""

    eh: nh.EffectiveHamiltonian
    c_policy: Any
    label: str
    jump_model: JumpModel

    @property
    def params(self) -> nh.C2Params | None:
        if self.eh.dim != 2:
            return None
        return nh.c2_parametrize(self.eh.h_eff, self.eh.c)


def parse_effective(x: dict, path: str) -> EffectiveNH:
    h = parse_matrix(_get(x, "h_eff", path), f"{path}.h_eff")
    c = _get(x, "c", path, "auto")
    if c != "auto":
        c = parse_float(c, f"{path}.c")
    label = str(_get(x, "label", path, "jump"))
    try:
        eh = nh.decompose(h, c)
        return EffectiveNH(eh, c, label, nh.jump_model(eh, label))
    except QJumpError as exc:
        raise _model_error(path, exc) from exc


def serialize_effective(m: EffectiveNH) -> dict:
    return {"type": "effective_nh", "h_eff": serialize_matrix(m.eh.h_eff), "c": m.c_policy, "label": m.label}


def parse_interspersed(x: dict, path: str) -> InterspersedModel:
    dim = parse_int(_get(x, "dim", path), f"{path}.dim", 1)
    raw_laws = _get(x, "laws", path)
    if not isinstance(raw_laws, list) or not raw_laws:
        raise ScenarioError(f"{path}.laws", "expected a non-empty list")
    laws = [parse_law(l, f"{path}.laws[{i}]") for i, l in enumerate(raw_laws)]
    instruments = []
    for m, fam in enumerate(_get(x, "instruments", path)):
        p = f"{path}.instruments[{m}]"
        outs = []
        for i, o in enumerate(fam):
            q = f"{p}[{i}]"
            outs.append((
                str(_get(o, "label", q)),
                parse_float(_get(o, "weight", q), f"{q}.weight", positive=True),
                [parse_matrix(k, f"{q}.kraus[{j}]", dim) for j, k in enumerate(_get(o, "kraus", q))],
            ))
        instruments.append(outs)
    smooth = []
    for m, s in enumerate(_get(x, "smooth", path, [None])):
        p = f"{path}.smooth[{m}]"
        if s is None:
            smooth.append(None)
        else:
            smooth.append((
                parse_matrix(_get(s, "hamiltonian", p), f"{p}.hamiltonian", dim),
                [parse_matrix(l, f"{p}.lindblads[{i}]", dim) for i, l in enumerate(_get(s, "lindblads", p, []))],
            ))
    try:
        return build_interspersed(dim, laws, instruments, smooth)
    except QJumpError as exc:
        raise _model_error(path, exc) from exc


def serialize_interspersed(m: InterspersedModel) -> dict:
    smooth = []
    for entry in m.smooth_spec or (None,) * len(m.smooth):
        if entry is None:
            smooth.append(None)
        else:
            h, ls = entry
            smooth.append({"hamiltonian": serialize_matrix(h), "lindblads": [serialize_matrix(l) for l in ls]})
    return {
        "type": "interspersed",
        "dim": m.dim,
        "laws": [serialize_law(l) for l in m.laws],
        "instruments": [
            [{"label": o.label, "weight": o.weight, "kraus": [serialize_matrix(k) for k in o.kraus]} for o in ins]
            for ins in m.instruments
        ],
        "smooth": smooth,
    }


def parse_walk(x: dict, path: str) -> WalkModel:
    try:
        if "two_level" in x:
            p = f"{path}.two_level"
            t = x["two_level"]
            nu = _get(t, "nu", p, None)
            return two_level_example(
                _get(t, "case", p),
                parse_float(_get(t, "omega0", p), f"{p}.omega0"),
                parse_float(_get(t, "omega1", p), f"{p}.omega1"),
                parse_float(_get(t, "nu0", p), f"{p}.nu0", positive=True),
                parse_float(_get(t, "nu1", p), f"{p}.nu1", positive=True),
                None if nu is None else parse_float(nu, f"{p}.nu", positive=True),
            )
        verts = _get(x, "vertices", path)
        labels = _get(x, "labels", path)
        rates = [parse_float(r, f"{path}.rates[{i}]", positive=True) for i, r in enumerate(_get(x, "rates", path))]
        targets = []
        for u, tg in enumerate(_get(x, "targets", path)):
            if not isinstance(tg, dict):
                raise ScenarioError(f"{path}.targets[{u}]", "expected an object vertex -> vertex")
            targets.append({int(k): parse_int(v, f"{path}.targets[{u}].{k}", 0) for k, v in tg.items()})
        hs = [parse_matrix(h, f"{path}.hamiltonians[{k}]") for k, h in enumerate(_get(x, "hamiltonians", path))]
        dim = hs[0].shape[0] if hs else None
        lind = _get(x, "lindblads", path, None)
        ls = None if lind is None else [
            [parse_matrix(l, f"{path}.lindblads[{k}][{i}]", dim) for i, l in enumerate(row)]
            for k, row in enumerate(lind)
        ]
        kraus = {}
        for i, entry in enumerate(_get(x, "kraus", path)):
            p = f"{path}.kraus[{i}]"
            key = (parse_int(_get(entry, "vertex", p), f"{p}.vertex", 0), parse_int(_get(entry, "label", p), f"{p}.label", 0))
            kraus[key] = [parse_matrix(k, f"{p}.ops[{j}]", dim) for j, k in enumerate(_get(entry, "ops", p))]
        return build_walk(verts, labels, rates, targets, hs, kraus, ls)
    except ScenarioError:
        raise
    except QJumpError as exc:
        raise _model_error(path, exc) from exc


def serialize_walk(m: WalkModel) -> dict:
    if hasattr(m, "case"):
        return {
            "type": "walk",
            "two_level": {
                "case": m.case, "omega0": m.omegas[0], "omega1": m.omegas[1],
                "nu0": m.nus[0], "nu1": m.nus[1], "nu": float(m.rates[0]),
            },
        }
    return {
        "type": "walk",
        "vertices": [list(v) for v in m.vertices],
        "labels": list(m.labels),
        "rates": [float(r) for r in m.rates],
        "targets": [{str(k): v for k, v in tg.items()} for tg in m.targets],
        "hamiltonians": [serialize_matrix(h) for h in m.hamiltonians],
        "lindblads": [[serialize_matrix(l) for l in row] for row in m.lindblads],
        "kraus": [
            {"vertex": k, "label": u, "ops": [serialize_matrix(j) for j in ops]}
            for (k, u), ops in sorted(m.kraus.items())
        ],
    }


def parse_model(x: Any, path: str = "model"):
    kind = _get(x, "type", path)
    if kind == "generic_jump":
        return parse_generic(x, path)
    if kind == "effective_nh":
        return parse_effective(x, path)
    if kind == "interspersed":
        return parse_interspersed(x, path)
    if kind == "revival":
        return RevivalModel(parse_law(_get(x, "law", path), f"{path}.law"))
    if kind == "walk":
        return parse_walk(x, path)
    raise ScenarioError(f"{path}.type", f"unknown model type {kind!r}; expected one of {MODEL_TYPES}")


def serialize_model(m) -> dict:
    if isinstance(m, JumpModel):
        return serialize_generic(m)
    if isinstance(m, EffectiveNH):
        return serialize_effective(m)
    if isinstance(m, InterspersedModel):
        return serialize_interspersed(m)
    if isinstance(m, RevivalModel):
        return {"type": "revival", "law": serialize_law(m.law)}
    if isinstance(m, WalkModel):
        return serialize_walk(m)
    raise TypeError(f"cannot serialize {type(m).__name__}")


def model_dim(m) -> int:
    if isinstance(m, EffectiveNH):
        return m.eh.dim
    if isinstance(m, RevivalModel):
        return 2
    return m.dim


# --------------------------------------------------------------------------- #
# states


def parse_state(x: Any, path: str, model) -> NDArray | HybridState:
    if isinstance(model, WalkModel):
        if not isinstance(x, dict) or "vertex" not in x:
            raise ScenarioError(path, "walk scenarios need {\"vertex\": k, \"state\": ...}")
        k = parse_int(x["vertex"], f"{path}.vertex", 0)
        if k >= model.n:
            raise ScenarioError(f"{path}.vertex", f"vertex outside 0..{model.n - 1}")
        rho = parse_state(_get(x, "state", path), f"{path}.state", _Dim(model.dim))
        return HybridState(k, rho)
    dim = model_dim(model)
    try:
        if isinstance(x, str):
            if x in ("P0", "P1"):
                rho = NAMED_MATRICES[x]
            elif x == "plus":
                rho = pure_state(np.array([1.0, 1.0]) / math.sqrt(2.0))
            elif x in ("phi0", "phi1"):
                if not isinstance(model, EffectiveNH) or model.params is None:
                    raise ScenarioError(path, f"{x} requires a 2x2 effective_nh model")
                p0, p1 = nh.ep_basis(model.params)
                rho = pure_state(p0 if x == "phi0" else p1)
            else:
                raise ScenarioError(path, f"unknown named state {x!r}")
        elif isinstance(x, dict) and "ket" in x:
            ket = np.array([parse_complex(v, f"{path}.ket[{i}]") for i, v in enumerate(x["ket"])])
            rho = pure_state(ket)
        elif isinstance(x, dict) and "coefficients" in x and isinstance(model, EffectiveNH):
            # combination a phi0 + b phi1 of the exceptional-point basis
            p = model.params
            if p is None:
                raise ScenarioError(path, "coefficients require a 2x2 effective_nh model")
            a, b = (parse_complex(v, f"{path}.coefficients[{i}]") for i, v in enumerate(x["coefficients"]))
            p0, p1 = nh.ep_basis(p)
            rho = pure_state(a * p0 + b * p1)
        else:
            rho = parse_matrix(x, path, dim)
        if rho.shape != (dim, dim):
            raise ScenarioError(path, f"state dimension {rho.shape[0]} differs from model dimension {dim}")
        return as_density(rho, dim)
    except ScenarioError:
        raise
    except QJumpError as exc:
        raise ScenarioError(path, str(exc)) from exc


@dataclass(frozen=True)
class _Dim:
    dim: int


def serialize_state(s: NDArray | HybridState) -> Any:
    if isinstance(s, HybridState):
        return {"vertex": s.vertex, "state": serialize_matrix(s.rho)}
    return serialize_matrix(s)


# --------------------------------------------------------------------------- #
# scenario


@dataclass(eq=False)
class Scenario:
    """Validated scenario document."""

    schema_version: str
    model: Any
    initial_state: NDArray | HybridState
    horizon: float
    trajectories: int
    seed: int
    outputs: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)


_KNOWN = {"schema_version", "model", "initial_state", "horizon", "trajectories", "seed", "outputs"}


def parse_scenario(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "scenario must be a JSON object")
    ver = _get(doc, "schema_version", "$")
    if str(ver) != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {ver!r}; expected {SCHEMA_VERSION!r}")
    model = parse_model(_get(doc, "model", "$"))
    state = parse_state(_get(doc, "initial_state", "$"), "initial_state", model)
    horizon = parse_float(_get(doc, "horizon", "$", 1.0), "horizon", nonneg=True)
    traj = parse_int(_get(doc, "trajectories", "$", 1000), "trajectories", 0)
    seed = parse_int(_get(doc, "seed", "$", 0), "seed", 0)
    if seed >= 2**64:
        raise ScenarioError("seed", "must fit in 64 bits")
    outputs = _get(doc, "outputs", "$", [])
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ScenarioError("outputs", "expected a list of table names")
    extra = {k: v for k, v in doc.items() if k not in _KNOWN}
    return Scenario(str(ver), model, state, horizon, traj, seed, list(outputs), extra)


def serialize_scenario(s: Scenario) -> dict:
    out = {
        "schema_version": s.schema_version,
        "model": serialize_model(s.model),
        "initial_state": serialize_state(s.initial_state),
        "horizon": s.horizon,
        "trajectories": s.trajectories,
        "seed": s.seed,
        "outputs": list(s.outputs),
    }
    out.update(s.extra)
    return out


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(str(p), f"cannot read scenario: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(p), f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_scenario(doc)
