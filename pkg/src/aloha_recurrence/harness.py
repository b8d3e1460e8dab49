"""Experiment configuration, region sweeps and result serialization.

Configuration files are JSON::

    {
      "users": [
        {"arrival": {"kind": "bernoulli", "p": 0.3},
         "window":  {"kind": "bernoulli", "p": 0.7}}
      ],
      "seed": 42, "horizon": 1000, "replications": 100
    }

Optional blocks: ``init`` (start state), ``witness`` (search options),
``oracle`` (``truncation``), ``lyapunov`` (``n_max``), ``escape`` (``K``),
``return_times`` (``tail``) and ``sweep`` (region scan grid).  Unknown keys
are rejected.
"""
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple

import itertools

import jsonschema
import numpy as np

from .chain import NetworkConfig
from .dists import DistributionSpec, make_distribution
from .errors import (DomainError, EmptyGrid, GridTooLarge, InvalidPmf, SchemaError,
                     ZeroProbOfOne)
from .recurrence import return_time_stats, sample_return_times
from .region import (INDETERMINATE, WitnessOptions, c1_membership, classify,
                     find_c1_witness, single_packet_load, witness_config)

MAX_GRID_POINTS = 100_000
MAX_AUTO_MC_POINTS = 20
U64_MAX = (1 << 64) - 1

_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_POS_INT = {"type": "integer", "minimum": 1}

_DIST_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {"kind": {"enum": ["bernoulli", "finite_pmf", "poisson", "geometric"]}},
    "allOf": [
        {"if": {"properties": {"kind": {"const": "bernoulli"}}},
         "then": {"required": ["p"], "additionalProperties": False,
                  "properties": {"kind": {}, "p": _PROB}}},
        {"if": {"properties": {"kind": {"const": "geometric"}}},
         "then": {"required": ["p"], "additionalProperties": False,
                  "properties": {"kind": {}, "p": {"type": "number", "exclusiveMinimum": 0,
                                                   "maximum": 1}}}},
        {"if": {"properties": {"kind": {"const": "poisson"}}},
         "then": {"required": ["mu"], "additionalProperties": False,
                  "properties": {"kind": {}, "mu": {"type": "number", "exclusiveMinimum": 0}}}},
        {"if": {"properties": {"kind": {"const": "finite_pmf"}}},
         "then": {"required": ["pmf"], "additionalProperties": False,
                  "properties": {"kind": {}, "pmf": {"oneOf": [
                      {"type": "array", "minItems": 1, "items": _PROB},
                      {"type": "object", "minProperties": 1,
                       "propertyNames": {"pattern": "^[0-9]+$"},
                       "additionalProperties": _PROB}]}}}},
    ],
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["users"],
    "additionalProperties": False,
    "properties": {
        "users": {"type": "array", "minItems": 1, "items": {
            "type": "object", "required": ["arrival", "window"], "additionalProperties": False,
            "properties": {"arrival": _DIST_SCHEMA, "window": _DIST_SCHEMA}}},
        "seed": {"type": "integer", "minimum": 0, "maximum": U64_MAX},
        "horizon": _POS_INT,
        "replications": _POS_INT,
        "init": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "witness": {"type": "object", "additionalProperties": False, "properties": {
            "grid_points": _POS_INT, "n_starts": _POS_INT, "max_iter": _POS_INT,
            "tolerance": {"type": "number", "exclusiveMinimum": 0},
            "seed": {"type": "integer", "minimum": 0, "maximum": U64_MAX}}},
        "oracle": {"type": "object", "additionalProperties": False,
                   "properties": {"truncation": _POS_INT}},
        "lyapunov": {"type": "object", "additionalProperties": False,
                     "properties": {"n_max": _POS_INT}},
        "escape": {"type": "object", "additionalProperties": False,
                   "properties": {"K": _POS_INT}},
        "return_times": {"type": "object", "additionalProperties": False,
                         "properties": {"tail": {"type": "array", "items": _POS_INT}}},
        "sweep": {"type": "object", "additionalProperties": False, "required": ["axes"],
                  "properties": {
                      "axes": {"type": "array", "minItems": 1, "items": {
                          "type": "array", "items": {"type": "number"}}},
                      "dim": _POS_INT,
                      "diagonal": {"type": "boolean"},
                      "mc": {"oneOf": [{"enum": ["none", "auto"]},
                                       {"type": "array", "items": {"type": "integer",
                                                                   "minimum": 0}}]}}},
    },
}


@dataclass(frozen=True)
class SweepSpec:
    """A grid of rate points.

    ``axes`` holds one tuple of values per coordinate, or a single tuple
    broadcast to ``dim`` coordinates.  With ``diagonal`` the points are
    ``(x, ..., x)`` for x on the single axis; otherwise the Cartesian product.
    ``mc`` is "none", "auto" or a tuple of point indices to validate by
    simulation.
    """

    axes: Tuple[Tuple[float, ...], ...]
    dim: Optional[int] = None
    diagonal: bool = False
    mc: object = "none"

    def points(self):
        axes = self.axes
        dim = self.dim or len(axes)
        if self.diagonal:
            if len(axes) != 1:
                raise DomainError("a diagonal sweep takes exactly one axis")
            return [(x,) * dim for x in axes[0]]
        if len(axes) == 1 and dim > 1:
            axes = axes * dim
        elif len(axes) != dim:
            raise DomainError(f"{len(axes)} axes given for dimension {dim}")
        return list(itertools.product(*axes))

    def to_dict(self):
        out = {"axes": [list(a) for a in self.axes]}
        if self.dim is not None:
            out["dim"] = self.dim
        if self.diagonal:
            out["diagonal"] = True
        if self.mc != "none":
            out["mc"] = self.mc if isinstance(self.mc, str) else list(self.mc)
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    network: NetworkConfig
    seed: int = 0
    horizon: Optional[int] = None
    replications: Optional[int] = None
    init: Optional[Tuple[int, ...]] = None
    witness: Optional[WitnessOptions] = None
    truncation: Optional[int] = None
    n_max: Optional[int] = None
    K: Optional[int] = None
    tail: Optional[Tuple[int, ...]] = None
    sweep: Optional[SweepSpec] = None

    def to_dict(self):
        out = self.network.to_dict()
        out["seed"] = self.seed
        for key in ("horizon", "replications"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.init is not None:
            out["init"] = list(self.init)
        if self.witness is not None:
            out["witness"] = {
                "grid_points": self.witness.grid_points, "n_starts": self.witness.n_starts,
                "tolerance": self.witness.tolerance, "max_iter": self.witness.max_iter,
                "seed": self.witness.seed}
        if self.truncation is not None:
            out["oracle"] = {"truncation": self.truncation}
        if self.n_max is not None:
            out["lyapunov"] = {"n_max": self.n_max}
        if self.K is not None:
            out["escape"] = {"K": self.K}
        if self.tail is not None:
            out["return_times"] = {"tail": list(self.tail)}
        if self.sweep is not None:
            out["sweep"] = self.sweep.to_dict()
        return out


def _json_path(error):
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _dist_from_dict(d, path):
    kind = d["kind"]
    try:
        if kind == "finite_pmf":
            spec = DistributionSpec.finite_pmf(d["pmf"])
        elif kind == "poisson":
            spec = DistributionSpec.poisson(d["mu"])
        else:
            spec = DistributionSpec(kind, (("p", float(d["p"])),))
        return make_distribution(spec)
    except InvalidPmf as exc:
        raise SchemaError(str(exc), path) from exc


def config_from_dict(obj):
    """Validate a decoded JSON object and build an :class:`ExperimentConfig`."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise SchemaError(err.message, _json_path(err))
    users = []
    for i, u in enumerate(obj["users"]):
        users.append((_dist_from_dict(u["arrival"], f"$.users[{i}].arrival"),
                      _dist_from_dict(u["window"], f"$.users[{i}].window")))
    try:
        network = NetworkConfig(tuple(users))
    except ZeroProbOfOne as exc:
        cond = "P(A_i(n) = 1) > 0" if exc.role == "arrival" else "P(W_i(n) = 1) > 0"
        raise ZeroProbOfOne(f"user {exc.user} {exc.role} law violates {cond}: "
                            "the queue chain would not be irreducible",
                            user=exc.user, role=exc.role) from exc
    init = obj.get("init")
    if init is not None and len(init) != network.m:
        raise SchemaError(f"init has {len(init)} entries for {network.m} users", "$.init")
    witness = WitnessOptions(**obj["witness"]) if "witness" in obj else None
    sweep = None
    if "sweep" in obj:
        sw = obj["sweep"]
        mc = sw.get("mc", "none")
        sweep = SweepSpec(axes=tuple(tuple(float(x) for x in a) for a in sw["axes"]),
                          dim=sw.get("dim"), diagonal=sw.get("diagonal", False),
                          mc=mc if isinstance(mc, str) else tuple(mc))
    return ExperimentConfig(
        network=network,
        seed=obj.get("seed", 0),
        horizon=obj.get("horizon"),
        replications=obj.get("replications"),
        init=None if init is None else tuple(init),
        witness=witness,
        truncation=obj.get("oracle", {}).get("truncation"),
        n_max=obj.get("lyapunov", {}).get("n_max"),
        K=obj.get("escape", {}).get("K"),
        tail=None if "return_times" not in obj else tuple(obj["return_times"].get("tail", ())),
        sweep=sweep,
    )


def parse_config(text):
    """Parse UTF-8 JSON bytes (or str) into a validated :class:`ExperimentConfig`."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"not UTF-8: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return config_from_dict(obj)


def serialize_config(config):
    return canonical_json(config.to_dict())


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_clean(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(x) for x in obj]
    return obj


def canonical_json(obj):
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def dumps(obj):
    """Pretty, deterministic JSON text ending in a newline."""
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_digest(obj):
    """64-bit hex digest of the canonical JSON form of a config or dict."""
    if isinstance(obj, ExperimentConfig):
        obj = obj.to_dict()
    return hashlib.blake2b(canonical_json(obj).encode("utf-8"), digest_size=8).hexdigest()


def return_time_record(config, stats, seed, horizon, replications):
    rec = {"config_digest": config_digest(config), "seed": seed, "horizon": horizon,
           "replications": replications}
    rec.update(stats.to_dict())
    return rec


def worker_count():
    try:
        return max(1, int(os.environ.get("ALOHA_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SweepRow:
    lam: Tuple[float, ...]
    witness_found: bool
    best_f: float
    verdict: str
    load_sum: float
    p: Tuple[float, ...]
    mc_mean: Optional[float] = None
    mc_censored: Optional[int] = None


@dataclass
class SweepTable:
    m: int
    rows: list = field(default_factory=list)

    @property
    def columns(self):
        lam = [f"lambda_{i + 1}" for i in range(self.m)]
        p = [f"p_{i + 1}" for i in range(self.m)]
        return lam + ["witness_found", "best_f", "verdict", "load_sum",
                      "mc_mean", "mc_censored"] + p

    def to_csv(self, fh=None):
        own = fh is None
        if own:
            fh = io.StringIO()
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow([repr(x) for x in r.lam]
                            + [str(r.witness_found).lower(), repr(r.best_f), r.verdict,
                               repr(r.load_sum),
                               "" if r.mc_mean is None else repr(r.mc_mean),
                               "" if r.mc_censored is None else str(r.mc_censored)]
                            + [repr(x) for x in r.p])
        if own:
            return fh.getvalue()


def _scan_point(lam, opts):
    res = find_c1_witness(lam, opts)
    if res.found:
        verdict = classify(witness_config(lam, res.p))
        return SweepRow(tuple(lam), True, res.best_f, verdict.label, verdict.load_sum, res.p)
    return SweepRow(tuple(lam), False, res.best_f, INDETERMINATE, res.best_f, res.best_p)


def region_scan(sweep, opts=None, seed=0, horizon=10_000, replications=1000):
    """Run the witness search at every grid point.

    A point with a witness is classified under the Bernoulli network built
    from that witness; otherwise the row is Indeterminate and its load sum is
    the best value found.  Points selected by ``sweep.mc`` (explicit indices,
    or with "auto" the ones whose best value is closest to 1) are also
    simulated from the origin, under the witness or best attempt vector.
    """
    opts = opts or WitnessOptions()
    points = sweep.points()
    if not points:
        raise EmptyGrid("the sweep grid has no points")
    if len(points) > MAX_GRID_POINTS:
        raise GridTooLarge(f"{len(points)} points exceed {MAX_GRID_POINTS}")
    m = len(points[0])
    if m not in (1, 2, 3):
        raise DomainError("tabular region scans support M in {1, 2, 3}")
    for pt in points:
        if any(not (0.0 < x < 1.0) for x in pt):
            raise DomainError(f"grid point {pt} is outside (0, 1)^M")
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(lambda pt: _scan_point(pt, opts), points))

    if sweep.mc == "auto":
        order = sorted(range(len(rows)), key=lambda k: (abs(rows[k].best_f - 1.0), k))
        flagged = sorted(order[:MAX_AUTO_MC_POINTS])
    elif sweep.mc == "none":
        flagged = []
    else:
        flagged = sorted(set(sweep.mc))
        if flagged and flagged[-1] >= len(rows):
            raise DomainError(f"MC point index {flagged[-1]} out of range")
    for k in flagged:
        row = rows[k]
        outs = sample_return_times(witness_config(row.lam, row.p), replications, horizon,
                                   seed + k)
        st = return_time_stats(outs)
        rows[k] = SweepRow(row.lam, row.witness_found, row.best_f, row.verdict,
                           row.load_sum, row.p, st.mean, st.n_censored)
    return SweepTable(m, rows)


def verify_row(row):
    """Recompute a sweep row's verdict fields from its inputs."""
    if row.witness_found:
        ok = c1_membership(row.lam, row.p)
        v = classify(witness_config(row.lam, row.p))
        return ok and v.label == row.verdict and v.load_sum == row.load_sum
    return row.verdict == INDETERMINATE and single_packet_load(row.lam, row.p) == row.best_f
