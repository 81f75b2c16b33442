"""Scenario documents: schema, defaults, overrides, generation and manifests.

A scenario document is a JSON object::

    {
      "seed": 0,
      "denominator_floor": 1e-6,
      "regions": [{"region_id": 0, "route_length": 1200, "reward_pool": 1500}, ...],
      "populations": [{"population_id": 0, "size": 120, "strategies": [0, 1, 2],
                       "traversal_distance": [...], "data_quality": [...],
                       "propulsion_power": 18, "hover_power": 17,
                       "traversal_speed": 4, "sensing_speed": 4.5,
                       "unit_energy_cost": 0.001}, ...],
      "protocol": {"kind": "hybrid", "alpha": [0.2, 0.3, 0.0], "frozen": []},
      "initial_state": [[0.3, 0.3, 0.4], ...],
      "integrator": {...}, "stochastic": {...},
      "field": {...}, "equilibria": {...}, "sweep": {...}
    }

Only ``regions`` and ``populations`` are required. Distances are meters;
``route_length_km`` and ``traversal_distance_km`` are accepted and converted.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .dynamics import RevisionProtocol
from .errors import SyncGameError, ValidationError
from .game import PopulationSpec, RegionSpec, Scenario, check_state
from .integrator import IntegratorConfig
from .stochastic import StochasticConfig

FORMAT = "syncgame-scenario"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_index = {"type": "integer", "minimum": 0}
_pair = {"type": "array", "items": _index, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "format": {"const": FORMAT},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "denominator_floor": _pos,
    "regions": {"type": "array", "minItems": 1, "items": _obj({
        "region_id": _index,
        "route_length": _pos,
        "route_length_km": _pos,
        "reward_pool": _nonneg,
    }, ["region_id", "reward_pool"])},
    "populations": {"type": "array", "minItems": 1, "items": _obj({
        "population_id": _index,
        "size": {"type": "integer", "minimum": 1},
        "strategies": {"type": "array", "items": _index, "minItems": 1},
        "traversal_distance": {"type": "array", "items": _nonneg},
        "traversal_distance_km": {"type": "array", "items": _nonneg},
        "data_quality": {"type": "array", "items": _pos},
        "propulsion_power": _nonneg,
        "hover_power": _nonneg,
        "traversal_speed": _pos,
        "sensing_speed": _pos,
        "unit_energy_cost": _nonneg,
    }, ["population_id", "size", "strategies", "data_quality", "propulsion_power",
        "hover_power", "traversal_speed", "sensing_speed"])},
    "protocol": _obj({
        "kind": {"enum": ["hybrid", "replicator", "smith"]},
        "alpha": {"type": "array", "items": _prob},
        "frozen": {"type": "array", "items": _index},
    }),
    "initial_state": {"type": "array", "items": {"type": "array", "items": _nonneg}},
    "integrator": _obj({
        "step_size": _pos,
        "max_time": _nonneg,
        "convergence_tau": _pos,
        "extinction_threshold": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "record_stride": {"type": "integer", "minimum": 1},
        "stop_at_convergence": {"type": "boolean"},
    }),
    "stochastic": _obj({
        "clock_rate": _pos,
        "rate_bound": _pos,
        "horizon": _nonneg,
        "record_interval": _pos,
        "runs": {"type": "integer", "minimum": 1},
    }),
    "field": _obj({
        "axes": {"type": "array", "items": _pair, "minItems": 2, "maxItems": 2},
        "resolution": {"type": "array", "items": {"type": "integer", "minimum": 1},
                       "minItems": 2, "maxItems": 2},
        "bounds": {"type": "array", "minItems": 2, "maxItems": 2,
                   "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "base_state": {"type": ["array", "null"], "items": {"type": "array", "items": _num}},
    }),
    "equilibria": _obj({
        "restrict": {"type": ["array", "null"], "items": _index},
        "population": _index,
        "grid": {"type": "integer", "minimum": 2},
        "cluster_tol": _pos,
        "residual_tol": _pos,
    }),
    "sweep": _obj({
        "population": _index,
        "alpha": {"type": "array", "items": _prob, "minItems": 1},
        "workers": {"type": "integer", "minimum": 1},
    }),
}, ["regions", "populations"])

_KM_KEYS = {"route_length_km": "route_length", "traversal_distance_km": "traversal_distance"}


# -- source locations ------------------------------------------------------


def locate_lines(text: str) -> dict:
    """Map every JSON path (tuple of keys/indices) in ``text`` to its 1-based line."""
    decoder = json.JSONDecoder()
    scanstring = json.decoder.scanstring
    lines = {}

    def ws(i):
        while i < len(text) and text[i] in " \t\r\n":
            i += 1
        return i

    def value(i, path):
        i = ws(i)
        lines[path] = text.count("\n", 0, i) + 1
        c = text[i]
        if c == "{":
            i = ws(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                i = ws(i)
                key, i = scanstring(text, i + 1)
                i = ws(i)
                keypos = i
                i = value(i + 1, path + (key,))
                lines.setdefault(path + (key,), text.count("\n", 0, keypos) + 1)
                i = ws(i)
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        if c == "[":
            i = ws(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = value(i, path + (k,))
                k += 1
                i = ws(i)
                if text[i] == ",":
                    i += 1
                    continue
                return i + 1
        _, end = decoder.scan_once(text, i)
        return end

    value(0, ())
    return lines


def _path_str(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def _line_for(lines, path):
    path = tuple(path)
    while path:
        if path in lines:
            return lines[path]
        km = path[:-1] + (f"{path[-1]}_km",) if isinstance(path[-1], str) else None
        if km in lines:
            return lines[km]
        path = path[:-1]
    return lines.get(())


# -- parsing -----------------------------------------------------------------


def _schema_error(err: jsonschema.ValidationError):
    path = list(err.absolute_path)
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            path.append(extra[0])
            return path, f"unknown key {extra[0]!r}"
    return path, err.message


def validate_document(doc, lines=None, source=None):
    """Schema-check ``doc``; raises :class:`ValidationError` naming the offending path."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        path, msg = _schema_error(errors[0])
        line = _line_for(lines or {}, path)
        prefix = f"{source}: " if source else ""
        raise ValidationError(prefix + msg, path=_path_str(path), line=line)
    return doc


def _normalize_units(doc):
    for section in ("regions", "populations"):
        for k, item in enumerate(doc.get(section, [])):
            for km, base in _KM_KEYS.items():
                if km not in item:
                    continue
                if base in item:
                    raise ValidationError(f"both {base!r} and {km!r} given", path=f"{section}.{k}.{km}")
                v = item.pop(km)
                item[base] = [x * 1000.0 for x in v] if isinstance(v, list) else v * 1000.0
    return doc


def parse_text(text: str, source: str | None = None):
    """Parse and validate a document; returns ``(resolved, lines)``.

    A run manifest is accepted too; its ``config`` is used verbatim.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    lines = locate_lines(text)
    if isinstance(doc, dict) and "manifest_sha256" in doc and "config" in doc:
        doc = doc["config"]
        lines = {k[1:]: v for k, v in lines.items() if k[:1] == ("config",)}
    validate_document(doc, lines, source)
    doc = _normalize_units(copy.deepcopy(doc))
    resolved = resolve(doc)
    try:
        build(resolved)
    except ValidationError as exc:
        exc.line = exc.line or _line_for(lines, _split_path(exc.path or ""))
        raise
    return resolved, lines


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, source=str(path))[0]


# -- defaults ----------------------------------------------------------------


def resolve(doc: dict) -> dict:
    """Fill every optional section so the document states the full configuration."""
    d = copy.deepcopy(doc)
    d.pop("format", None)
    P = len(d["populations"])
    d.setdefault("seed", 0)
    d.setdefault("denominator_floor", 1e-6)
    for pop in d["populations"]:
        pop.setdefault("unit_energy_cost", 0.001)
        pop.setdefault("traversal_distance", [0.0] * len(pop["strategies"]))
    proto = d.setdefault("protocol", {})
    proto.setdefault("kind", "hybrid")
    proto.setdefault("alpha", [0.0] * P)
    proto.setdefault("frozen", [])
    if "initial_state" not in d:
        d["initial_state"] = [[1.0 / len(p["strategies"])] * len(p["strategies"])
                              for p in d["populations"]]
    ic = IntegratorConfig()
    integ = d.setdefault("integrator", {})
    for key in ("step_size", "max_time", "convergence_tau", "extinction_threshold",
                "record_stride", "stop_at_convergence"):
        integ.setdefault(key, getattr(ic, key))
    sc = StochasticConfig()
    sto = d.setdefault("stochastic", {})
    for key in ("clock_rate", "rate_bound", "horizon", "record_interval"):
        sto.setdefault(key, getattr(sc, key))
    sto.setdefault("runs", 1)
    fld = d.setdefault("field", {})
    fld.setdefault("axes", [[0, 0], [0, 1]])
    fld.setdefault("resolution", [20, 20])
    fld.setdefault("bounds", [[0.0, 1.0], [0.0, 1.0]])
    fld.setdefault("base_state", None)
    eq = d.setdefault("equilibria", {})
    eq.setdefault("restrict", None)
    eq.setdefault("population", 0)
    eq.setdefault("grid", 10)
    eq.setdefault("cluster_tol", 1e-3)
    eq.setdefault("residual_tol", 1e-6)
    sw = d.setdefault("sweep", {})
    sw.setdefault("population", P - 1)
    sw.setdefault("alpha", [round(0.1 * k, 1) for k in range(11)])
    sw.setdefault("workers", 1)
    return d


# -- overrides ---------------------------------------------------------------


def _split_path(dotted: str):
    return [int(t) if t.lstrip("-").isdigit() else t for t in dotted.split(".") if t]


def apply_overrides(resolved: dict, overrides) -> dict:
    """Apply ``dotted.path=value`` strings to a resolved document.

    Values are parsed as JSON when possible, else kept as strings. Only
    existing scalar entries can be replaced.
    """
    d = copy.deepcopy(resolved)
    for item in overrides or ():
        if "=" not in item:
            raise ValidationError(f"override {item!r} must look like path=value", path=item)
        dotted, raw = item.split("=", 1)
        path = _split_path(dotted.strip())
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        try:
            for key in path[:-1]:
                node = node[key]
            current = node[path[-1]]
        except (KeyError, IndexError, TypeError):
            raise ValidationError(f"override targets unknown path {dotted!r}", path=dotted) from None
        if isinstance(current, (dict, list)):
            raise ValidationError(f"override {dotted!r} targets a container, not a scalar",
                                  path=dotted)
        node[path[-1]] = value
    validate_document(d, source="--set")
    build(d)
    return d


# -- construction ------------------------------------------------------------


@dataclass
class RunConfig:
    scenario: Scenario
    protocol: RevisionProtocol
    initial: np.ndarray
    integrator: IntegratorConfig
    stochastic: StochasticConfig
    runs: int
    document: dict


def _wrap(path, fn):
    try:
        return fn()
    except ValidationError as exc:
        raise ValidationError(exc.message, path=exc.path or path) from None
    except (SyncGameError, ValueError, TypeError) as exc:
        raise ValidationError(str(exc), path=path) from None


def build(resolved: dict) -> RunConfig:
    """Construct domain objects; invariant violations name the document path."""
    d = resolved
    regions = tuple(_wrap(f"regions.{k}", lambda r=r: RegionSpec(
        r["region_id"], route_length=float(r["route_length"]) if "route_length" in r else 0.0,
        reward_pool=float(r["reward_pool"]))) for k, r in enumerate(d["regions"]))
    P = len(d["populations"])
    proto = d["protocol"]
    if len(proto["alpha"]) != P:
        raise ValidationError(f"alpha needs {P} entries", path="protocol.alpha")
    pops = tuple(_wrap(f"populations.{k}", lambda p=p, k=k: PopulationSpec(
        p["population_id"], size=p["size"], strategies=tuple(p["strategies"]),
        traversal_distance=tuple(p["traversal_distance"]), data_quality=tuple(p["data_quality"]),
        propulsion_power=float(p["propulsion_power"]), hover_power=float(p["hover_power"]),
        traversal_speed=float(p["traversal_speed"]), sensing_speed=float(p["sensing_speed"]),
        unit_energy_cost=float(p["unit_energy_cost"]),
        smith_probability=float(proto["alpha"][k]))) for k, p in enumerate(d["populations"]))
    scenario = _wrap("populations", lambda: Scenario(regions, pops, float(d["denominator_floor"])))
    frozen = proto["frozen"]
    if any(f >= P for f in frozen):
        raise ValidationError("frozen population index out of range", path="protocol.frozen")
    kind = proto["kind"]
    if kind == "hybrid":
        protocol = RevisionProtocol.from_scenario(scenario, frozen)
    else:
        protocol = RevisionProtocol.pure("imitation" if kind == "replicator" else "comparison",
                                         P, frozen)
    initial = _wrap("initial_state", lambda: check_state(scenario, scenario.state(d["initial_state"])))
    integ = _wrap("integrator", lambda: IntegratorConfig(**d["integrator"]))
    s = d["stochastic"]
    sto = _wrap("stochastic", lambda: StochasticConfig(
        seed=d["seed"], clock_rate=s["clock_rate"], rate_bound=s["rate_bound"],
        horizon=s["horizon"], record_interval=s["record_interval"]))
    for section in ("equilibria", "sweep"):
        if d[section]["population"] >= P:
            raise ValidationError("population index out of range", path=f"{section}.population")
    return RunConfig(scenario, protocol, initial, integ, sto, int(s["runs"]), d)


# -- documents from code -----------------------------------------------------


def document_from_scenario(scenario: Scenario, initial=None, seed: int = 0) -> dict:
    doc = {
        "format": FORMAT,
        "seed": int(seed),
        "denominator_floor": scenario.denominator_floor,
        "regions": [{"region_id": r.region_id, "route_length": r.route_length,
                     "reward_pool": r.reward_pool} for r in scenario.regions],
        "populations": [{
            "population_id": p.population_id, "size": p.size, "strategies": list(p.strategies),
            "traversal_distance": list(p.traversal_distance), "data_quality": list(p.data_quality),
            "propulsion_power": p.propulsion_power, "hover_power": p.hover_power,
            "traversal_speed": p.traversal_speed, "sensing_speed": p.sensing_speed,
            "unit_energy_cost": p.unit_energy_cost,
        } for p in scenario.populations],
        "protocol": {"kind": "hybrid", "alpha": [p.smith_probability for p in scenario.populations],
                     "frozen": []},
    }
    if initial is not None:
        doc["initial_state"] = [[float(v) for v in b] for b in scenario.split(initial)]
    return doc


def default_document() -> dict:
    from .presets import default_scenario, initial_state

    sc = default_scenario()
    return document_from_scenario(sc, initial_state(sc))


RANGES = {
    "size": (50, 250),
    "traversal_distance": (300.0, 1000.0),
    "route_length": (1000.0, 1800.0),
    "reward_pool": (1000.0, 2000.0),
    "speed": (3.0, 5.0),
    "power": (16.0, 20.0),
    "data_quality": (1.0, 5.0),
}
DEFAULT_ALPHA = (0.2, 0.3, 0.0)


def generate_scenario(seed: int, num_populations: int = 3, num_regions: int = 3) -> dict:
    """Random document with every value drawn uniformly from its experimental range.

    Every population may choose every region. Smith probabilities cycle
    through ``DEFAULT_ALPHA``.
    """
    if num_populations < 1 or num_regions < 1:
        raise ValidationError("need at least one population and one region")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))

    def u(key, n=None):
        lo, hi = RANGES[key]
        v = rng.uniform(lo, hi, n)
        return [round(float(x), 3) for x in v] if n is not None else round(float(v), 3)

    regions = [{"region_id": m, "route_length": u("route_length"), "reward_pool": u("reward_pool")}
               for m in range(num_regions)]
    pops = []
    for p in range(num_populations):
        lo, hi = RANGES["size"]
        pops.append({
            "population_id": p,
            "size": int(rng.integers(lo, hi + 1)),
            "strategies": list(range(num_regions)),
            "traversal_distance": u("traversal_distance", num_regions),
            "data_quality": u("data_quality", num_regions),
            "propulsion_power": u("power"),
            "hover_power": u("power"),
            "traversal_speed": u("speed"),
            "sensing_speed": u("speed"),
            "unit_energy_cost": 0.001,
        })
    return {
        "format": FORMAT,
        "seed": int(seed),
        "regions": regions,
        "populations": pops,
        "protocol": {"kind": "hybrid",
                     "alpha": [DEFAULT_ALPHA[p % len(DEFAULT_ALPHA)] for p in range(num_populations)],
                     "frozen": []},
    }


def dumps(doc) -> str:
    """Canonical text form used for files and hashing."""
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- manifests ---------------------------------------------------------------


def manifest(resolved: dict, command: str) -> dict:
    from . import __version__

    body = {"tool": "syncgame", "version": __version__, "command": command,
            "seed": resolved["seed"], "config": resolved}
    digest = hashlib.sha256(
        json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()
    ).hexdigest()
    return {**body, "manifest_sha256": digest}
