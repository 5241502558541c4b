"""JSON run configuration: schema, defaults, overrides and report output.

A configuration document looks like::

    {
      "schema_version": 1,
      "scenario": {"availability": 0.5, "teams": 2, "team_size": 9},
      "regime": "sat-ti",
      "simulation": {"scheme": "gcss", "seed": 7, "max_cycles": 2000},
      "sweep": {"axis": "p", "values": [0.5, 0.6667]},
      "compare": {"schemes": ["gcss", "acss", "ecss"], "seeds": [0, 1, 2]}
    }

Every section and key is optional.  Omitted scenario values fall back to
the reference network of :func:`gcmac.analytics.default_scenario`:
10 channels, mu_off = 0.01, 1 ms sensing, 40-byte control packets, ten
rates from 0.1 to 1.0 MB/s, detection target 0.9 and false-alarm
threshold 0.05.
"""
from __future__ import annotations

import copy
import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import jsonschema

from .analytics import Regime, Scenario, TrafficParams, default_scenario
from .channel import OnOffChannel, birth_death_chain
from .detection import DetectorConfig, pf_single, with_target_pd
from .errors import ConfigError, GcmacError, UnstableQueueError
from .optimizer import SWEEP_AXES, SweepPoint
from .simulator import SimConfig

SCHEMA_VERSION = 1

NORMALIZATION = (
    "volumes are bytes per cooperative discovery cycle; normalized values divide by T_r*R_max "
    "with T_r = 1/mu_off and R_max the largest data rate of the regime"
)

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_INT1 = {"type": "integer", "minimum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "regime": {"enum": [r.value for r in Regime]},
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "channels": _INT1,
                "sus": _INT1,
                "teams": _INT1,
                "team_size": _INT1,
                "mu_on": _POS,
                "mu_off": _POS,
                "availability": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "rate": _POS,
                "rates": {"type": "array", "items": _POS, "minItems": 1},
                "dwell": _POS,
                "rate_up": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sense_duration": {"type": "number", "minimum": 0},
                "pd": _PROB,
                "pf": _PROB,
                "pf_threshold": _PROB,
                "pd_threshold": _PROB,
                "samples": _INT1,
                "snr_db": _NUM,
                "packet_length": _POS,
                "r_use": _POS,
                "rate_pmf": {"enum": ["exact", "paper-literal"]},
                "overhead_model": {"enum": ["cumulative", "elapsed"]},
                "traffic": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {"load": {"type": "number", "minimum": 0}, "arrival_rate": {"type": "number", "minimum": 0}},
                },
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scheme": {"enum": ["gcss", "acss", "ecss"]},
                "seed": {"type": "integer", "minimum": 0},
                "horizon": _POS,
                "max_cycles": _INT1,
                "control_model": {"enum": ["ideal", "contended"]},
                "control_length": _INT1,
                "control_rate": _POS,
                "backoff_window": _INT1,
                "backoff_max": _INT1,
                "cooperator_state": {"enum": ["active", "aged"]},
                "misdetection_fails": {"type": "boolean"},
                "pair_presense": {"type": "boolean"},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "axis": {"enum": list(SWEEP_AXES)},
                "values": {"type": "array", "items": _NUM, "minItems": 1},
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "schemes": {"type": "array", "items": {"enum": ["gcss", "acss", "ecss"]}, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
            },
        },
    },
}

_DEFAULT_SIM = {"scheme": "gcss", "seed": 0, "max_cycles": 2000}


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration document and the objects built from it."""

    document: dict
    scenario: Scenario
    regime: Regime
    simulation: dict = field(default_factory=dict)
    sweep_axis: str = "p"
    sweep_values: tuple = (0.5, 2.0 / 3.0)
    schemes: tuple = ("gcss", "acss", "ecss")
    seeds: tuple = tuple(range(20))

    def sim_config(self, scheme: str | None = None, seed: int | None = None) -> SimConfig:
        s = dict(_DEFAULT_SIM, **self.simulation)
        if scheme is not None:
            s["scheme"] = scheme
        if seed is not None:
            s["seed"] = seed
        try:
            return SimConfig(
                scenario=self.scenario,
                scheme=s["scheme"],
                seed=s["seed"],
                sim_horizon=s.get("horizon", 1e9),
                max_cycles=s.get("max_cycles"),
                control_model=s.get("control_model", "ideal"),
                regime=self.regime,
                backoff_window=s.get("backoff_window", 16),
                backoff_max=s.get("backoff_max", 1024),
                control_rate=s.get("control_rate", 1e6),
                control_length=s.get("control_length", 40),
                cooperator_state=s.get("cooperator_state", "active"),
                misdetection_fails=s.get("misdetection_fails", True),
                pair_presense=s.get("pair_presense", True),
            )
        except GcmacError as exc:
            raise ConfigError("simulation", str(exc)) from exc


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key=value`` strings; dotted keys address nested sections.

    A bare key such as ``teams`` addresses the scenario section.  Setting
    ``mu_on`` drops any ``availability`` entry and vice versa, so the
    availability always follows the last stated parameter.
    """
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, _, raw = item.partition("=")
        path = key.strip().split(".")
        if len(path) == 1 and path[0] not in SCHEMA["properties"]:
            path = ["scenario"] + path
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "cannot set a key inside a non-object value")
        leaf = path[-1]
        node[leaf] = _coerce(raw)
        if path[0] == "scenario" and len(path) == 2:
            if leaf == "mu_on":
                node.pop("availability", None)
            elif leaf == "availability":
                node.pop("mu_on", None)
    return doc


def load_document(path) -> dict:
    """Read a configuration file; ``None`` means the empty document."""
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


def validate(doc: dict):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "config"
        if exc.validator == "additionalProperties":
            extra = sorted(set(exc.instance) - set(exc.schema.get("properties", {})))
            where = ".".join(filter(None, [where if where != "config" else "", extra[0] if extra else ""])) or where
            raise ConfigError(where, "unknown field") from None
        raise ConfigError(where, exc.message) from None


def _scenario(s: dict) -> Scenario:
    base = default_scenario()
    kw = {}
    for name in ("channels", "sus", "teams", "team_size", "rate", "sense_duration", "pf_threshold", "pd_threshold",
                 "packet_length", "r_use", "rate_pmf", "overhead_model"):
        if name in s:
            kw[name] = s[name]

    mu_off = s.get("mu_off", base.channel.mu_off)
    if "mu_on" in s and "availability" in s:
        raise ConfigError("scenario.availability", "give either availability or mu_on, not both")
    if "mu_on" in s:
        kw["channel"] = OnOffChannel(s["mu_on"], mu_off)
    else:
        kw["channel"] = OnOffChannel.from_availability(s.get("availability", base.availability), mu_off)

    if "rates" in s or "dwell" in s or "rate_up" in s:
        rates = s.get("rates", list(base.rate_chain.rates))
        try:
            kw["rate_chain"] = birth_death_chain(rates, s.get("dwell", base.rate_chain.dwell), s.get("rate_up", 0.5))
        except GcmacError as exc:
            raise ConfigError("scenario.rates", str(exc)) from exc

    if "samples" in s or "snr_db" in s or "pd" in s:
        pd = s.get("pd", base.pd)
        det = DetectorConfig.from_snr_db(samples=s.get("samples", 1000), snr_db=s.get("snr_db", -10.0))
        if 0 < pd < 1:
            det = with_target_pd(det, pd)
            kw["detector"] = det
            kw["pf"] = pf_single(det)
        kw["pd"] = pd
    if "pf" in s:
        kw["pf"] = s["pf"]

    if "traffic" in s:
        t = s["traffic"]
        try:
            kw["traffic"] = TrafficParams(load=t.get("load"), arrival_rate=t.get("arrival_rate"))
        except UnstableQueueError as exc:
            key = "load" if "load" in t else "arrival_rate"
            raise ConfigError(f"scenario.traffic.{key}", f"unstable queue: {exc}") from exc
        except GcmacError as exc:
            raise ConfigError("scenario.traffic", str(exc)) from exc

    try:
        sc = replace(base, **kw)
    except GcmacError as exc:
        raise ConfigError("scenario", str(exc)) from exc
    if sc.traffic is not None and sc.traffic.arrival_rate is not None:
        # rho must stay below one under both service laws
        try:
            sc.traffic.resolve(sc.packet_length / sc.rate)
            sc.traffic.resolve(sc.packet_length / min(sc.rate_chain.rates))
        except UnstableQueueError as exc:
            raise ConfigError("scenario.traffic.arrival_rate", f"unstable queue: {exc}") from exc
    return sc


def parse_config(path=None, overrides=()) -> RunConfig:
    """Load, override, validate and build a run configuration.

    Raises:
        ConfigError: with ``field`` naming the offending entry.
    """
    doc = apply_overrides(load_document(path), overrides)
    validate(doc)
    sc = _scenario(doc.get("scenario", {}))
    regime = Regime.parse(doc.get("regime", "sat-ti"))
    sim = doc.get("simulation", {})
    sweep = doc.get("sweep", {})
    comp = doc.get("compare", {})
    rc = RunConfig(
        document=doc,
        scenario=sc,
        regime=regime,
        simulation=dict(sim),
        sweep_axis=sweep.get("axis", "p"),
        sweep_values=tuple(sweep.get("values", (0.5, 2.0 / 3.0))),
        schemes=tuple(comp.get("schemes", ("gcss", "acss", "ecss"))),
        seeds=tuple(comp.get("seeds", range(20))),
    )
    rc.sim_config()  # reject bad simulation settings before any work
    return rc


# --- reports -------------------------------------------------------------------


def _clean(x):
    """Convert a result tree into plain JSON types."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def result_dict(result) -> dict:
    if isinstance(result, list) and result and isinstance(result[0], SweepPoint):
        return {
            "points": [
                {"axis": p.axis, "value": p.value, "error": p.error,
                 "result": p.result.to_dict() if p.result is not None else None}
                for p in result
            ]
        }
    if isinstance(result, list):
        return {"schemes": [r.to_dict() for r in result]}
    return result.to_dict()


def _csv_rows(command: str, result) -> tuple[list[str], list[list]]:
    if command in ("optimize", "sweep"):
        header = ["axis", "value", "U*", "q*", "throughput", "overhead", "achievable", "feasibility"]
        points = result if isinstance(result, list) else [SweepPoint("none", "", result)]
        rows = []
        for p in points:
            if p.result is None:
                rows.append([p.axis, p.value, "", "", "", "", "", p.error])
                continue
            n = p.result.normalized
            rows.append([p.axis, p.value, p.result.best_u, p.result.best_q, n["throughput"], n["overhead"],
                         n["achievable"], "feasible"])
        return header, rows
    if command == "analyze":
        n = result.normalized
        header = ["regime", "U", "q", "throughput", "overhead", "achievable", "feasibility"]
        flag = "feasible" if result.feasible else "infeasible:" + "+".join(k for k, v in result.constraints.items() if not v)
        return header, [[result.regime, result.teams, result.team_size, n["throughput"], n["overhead"], n["achievable"], flag]]
    if command == "simulate":
        n = result.normalized
        header = ["scheme", "seed", "U", "q", "coop_cycles", "throughput", "overhead", "achievable"]
        return header, [[result.scheme, result.seed, result.teams, result.team_size, result.coop_cycles,
                         n["throughput"], n["overhead"], n["achievable"]]]
    if command == "compare":
        header = ["scheme", "aggregate", "throughput", "overhead", "achievable"]
        rows = []
        for r in result:
            for agg in ("mean", "std"):
                d = getattr(r, agg)
                rows.append([r.scheme, agg, d["throughput"], d["overhead"], d["achievable"]])
        return header, rows
    raise ValueError(f"unknown command {command!r}")


def render_report(command: str, result, fmt: str = "json", document: dict | None = None) -> str:
    """Text of a report; identical inputs always give identical text."""
    if fmt == "json":
        body = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "normalization": NORMALIZATION,
            "config": _clean(document or {}),
            "result": _clean(result_dict(result)),
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        header, rows = _csv_rows(command, result)
        buf = io.StringIO()
        buf.write(f"# {command}; {NORMALIZATION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()
    raise ValueError(f"unknown format {fmt!r}")


def emit_report(command: str, result, path, fmt: str = "json", document: dict | None = None) -> None:
    """Write a report to ``path``."""
    text = render_report(command, result, fmt, document)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise ConfigError("out", f"cannot write {path}: {exc.strerror}") from exc


def load_result(path) -> dict:
    """Read back the ``result`` section of a JSON report."""
    return json.loads(Path(path).read_text())["result"]


__all__ = [
    "NORMALIZATION",
    "SCHEMA",
    "SCHEMA_VERSION",
    "RunConfig",
    "apply_overrides",
    "emit_report",
    "load_document",
    "load_result",
    "parse_config",
    "render_report",
    "validate",
]
