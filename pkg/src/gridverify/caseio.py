"""Case ingestion and result serialization.

Reads MATPOWER-style ``.m`` case files (the mpc.bus/mpc.gen/mpc.branch
subset relevant to DC analysis) or an equivalent JSON mirror, producing a
GridTopology.  Also owns the on-disk formats for attack scenarios (JSON),
per-link verification records (JSON lines), and campaign metrics (CSV).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, fields
from importlib import resources

import numpy as np

from .attack import POLICY_VERSION, AttackScenario, induced_links
from .grid import GridTopology, islands

__all__ = [
    "ParseError",
    "DanglingReference",
    "DisconnectedCase",
    "IoError",
    "SchemaError",
    "MetricsRow",
    "METRICS_HEADER",
    "parse_case",
    "parse_case_file",
    "bundled_case_path",
    "scenario_to_json",
    "scenario_from_json",
    "write_scenario",
    "read_scenario",
    "write_results",
    "read_results",
    "write_metrics",
    "read_metrics",
]


class ParseError(ValueError):
    """Malformed case file."""


class DanglingReference(ParseError):
    """A gen or branch row references a bus that does not exist."""


class DisconnectedCase(ParseError):
    """The pre-attack grid graph is not connected."""


class IoError(OSError):
    """File could not be read or written."""


class SchemaError(ValueError):
    """A results or metrics file does not match the expected schema."""


SCENARIO_VERSION = 1

# Fixed column order of the metrics CSV.
METRICS_HEADER = [
    "scenario_id",
    "area_size",
    "n_links",
    "n_failed",
    "connected",
    "n_identifiable_failed",
    "n_identifiable_operational",
    "testable_failed",
    "verified_failed",
    "testable_operational",
    "verified_operational",
    "alg2_added_failed",
    "alg2_added_operational",
    "guaranteed_failed",
    "guaranteed_operational",
    "precision",
    "recall",
]

_INT_FIELDS = {
    "area_size",
    "n_links",
    "n_failed",
    "n_identifiable_failed",
    "n_identifiable_operational",
    "testable_failed",
    "verified_failed",
    "testable_operational",
    "verified_operational",
    "alg2_added_failed",
    "alg2_added_operational",
    "guaranteed_failed",
    "guaranteed_operational",
}


@dataclass(frozen=True)
class MetricsRow:
    """One campaign trial's counts and estimator quality."""

    scenario_id: str
    area_size: int
    n_links: int
    n_failed: int
    connected: bool
    n_identifiable_failed: int
    n_identifiable_operational: int
    testable_failed: int
    verified_failed: int
    testable_operational: int
    verified_operational: int
    alg2_added_failed: int
    alg2_added_operational: int
    guaranteed_failed: int
    guaranteed_operational: int
    precision: float
    recall: float

    def __post_init__(self):
        for name in _INT_FIELDS:
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name}={v} is negative")
            if name not in ("area_size", "n_links") and v > self.n_links:
                raise ValueError(f"{name}={v} exceeds the number of area links")
        for name in ("precision", "recall"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


# ---------------------------------------------------------------------------
# case parsing


def _matrix(text: str, name: str) -> list[list[float]]:
    m = re.search(rf"mpc\.{name}\s*=\s*\[(.*?)\];", text, re.S)
    if m is None:
        raise ParseError(f"missing mpc.{name} table")
    rows = []
    for raw in m.group(1).splitlines():
        raw = raw.split("%", 1)[0].strip()
        raw = raw.rstrip(";").strip()
        if not raw:
            continue
        try:
            rows.append([float(tok) for tok in raw.split()])
        except ValueError as exc:
            raise ParseError(f"bad mpc.{name} row {raw!r}: {exc}") from None
    return rows


def _parse_matpower(text: str):
    buses = []
    for row in _matrix(text, "bus"):
        if len(row) < 3:
            raise ParseError(f"bus row too short: {row}")
        buses.append((int(row[0]), int(row[1]), row[2]))
    gens = []
    for row in _matrix(text, "gen"):
        if len(row) < 2:
            raise ParseError(f"gen row too short: {row}")
        gens.append((int(row[0]), row[1]))
    branches = []
    for row in _matrix(text, "branch"):
        if len(row) < 11:
            raise ParseError(f"branch row too short: {row}")
        branches.append((int(row[0]), int(row[1]), row[3], row[10] > 0))
    return buses, gens, branches


def _parse_json_mirror(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON case: {exc}") from None
    if doc.get("version") != 1:
        raise ParseError(f"unsupported case version {doc.get('version')!r}")
    try:
        buses = [(int(b["id"]), int(b["type"]), float(b["pd"])) for b in doc["bus"]]
        gens = [(int(g["bus"]), float(g["pg"])) for g in doc["gen"]]
        branches = [
            (
                int(b["from"]),
                int(b["to"]),
                float(b["x"]),
                bool(b.get("status", 1)),
            )
            for b in doc["branch"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad JSON case structure: {exc}") from None
    return buses, gens, branches


def parse_case(text: str) -> GridTopology:
    """Ingest a case (MATPOWER ``.m`` subset or its JSON mirror).

    Injections become sum(Pg) - Pd per bus; parallel in-service branches
    merge into a single link with the combined reactance; out-of-service
    branches are dropped; the residual system imbalance is absorbed at
    the slack bus (type 3) so the DC-idealized balance holds exactly.
    """
    if text.lstrip().startswith("{"):
        buses, gens, branches = _parse_json_mirror(text)
    else:
        buses, gens, branches = _parse_matpower(text)

    if not buses:
        raise ParseError("case has no buses")
    if not gens:
        raise ParseError("case has no generators")

    node_ids = []
    p = {}
    slack = None
    for bus_id, bus_type, pd in buses:
        if bus_id in p:
            raise ParseError(f"duplicate bus id {bus_id}")
        node_ids.append(bus_id)
        p[bus_id] = -pd
        if bus_type == 3 and slack is None:
            slack = bus_id
    if slack is None:
        raise ParseError("case has no slack bus (type 3)")

    for bus_id, pg in gens:
        if bus_id not in p:
            raise DanglingReference(f"gen references unknown bus {bus_id}")
        p[bus_id] += pg

    # Merge parallel branches: conductances add, first row fixes orientation.
    merged: dict[tuple[int, int], list] = {}
    order: list[tuple[int, int]] = []
    for f_bus, t_bus, x, status in branches:
        if f_bus not in p or t_bus not in p:
            raise DanglingReference(f"branch references unknown bus ({f_bus},{t_bus})")
        if not status:
            continue
        if x <= 0:
            raise ParseError(f"branch ({f_bus},{t_bus}) has nonpositive reactance {x}")
        key = (min(f_bus, t_bus), max(f_bus, t_bus))
        if key in merged:
            merged[key][1] += 1.0 / x
        else:
            merged[key] = [(f_bus, t_bus), 1.0 / x]
            order.append(key)

    node_ids.sort()
    p_arr = np.array([p[n] for n in node_ids], dtype=float)
    p_arr[node_ids.index(slack)] -= p_arr.sum()

    top = GridTopology(
        node_ids=tuple(node_ids),
        injections=p_arr,
        link_ids=tuple(range(1, len(order) + 1)),
        endpoints=tuple(merged[k][0] for k in order),
        reactance=np.array([1.0 / merged[k][1] for k in order]),
    )
    if len(islands(top, set())) != 1:
        raise DisconnectedCase("pre-attack grid graph is not connected")
    return top


def parse_case_file(path) -> GridTopology:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read case file {path}: {exc}") from None
    return parse_case(text)


def bundled_case_path(name: str = "bench300") -> str:
    """Filesystem path of a case file shipped with the package."""
    return str(resources.files("gridverify") / "data" / f"{name}.m")


# ---------------------------------------------------------------------------
# scenario files


def scenario_to_json(scenario: AttackScenario, case_id: str) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "case_id": case_id,
        "policy": POLICY_VERSION,
        "seed": scenario.seed,
        "v_h": sorted(scenario.v_h),
        "f": sorted(scenario.f),
    }


def scenario_from_json(doc: dict, topology: GridTopology) -> tuple[AttackScenario, str]:
    if doc.get("version") != SCENARIO_VERSION:
        raise SchemaError(f"unsupported scenario version {doc.get('version')!r}")
    if doc.get("policy") != POLICY_VERSION:
        raise SchemaError(f"scenario written under policy {doc.get('policy')!r}")
    try:
        v_h = frozenset(int(n) for n in doc["v_h"])
        f = frozenset(int(l) for l in doc["f"])
        case_id = str(doc["case_id"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad scenario document: {exc}") from None
    if not v_h <= set(topology.node_ids):
        raise SchemaError("scenario nodes not in case")
    scenario = AttackScenario(
        v_h=v_h,
        e_h=induced_links(topology, v_h),
        f=f,
        seed=doc.get("seed"),
    )
    return scenario, case_id


def write_scenario(scenario: AttackScenario, case_id: str, path) -> None:
    doc = scenario_to_json(scenario, case_id)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write scenario {path}: {exc}") from None


def read_scenario(path, topology: GridTopology) -> tuple[AttackScenario, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read scenario {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid scenario JSON: {exc}") from None
    return scenario_from_json(doc, topology)


# ---------------------------------------------------------------------------
# verification records


def write_results(ledger, scenario: AttackScenario, path) -> None:
    """One JSON line per area link, ordered by link id."""
    rows = ledger.rows()
    if {r.link for r in rows} != set(scenario.e_h):
        raise ValueError("ledger does not cover the area's links exactly")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in rows:
                fh.write(
                    json.dumps(
                        {
                            "link": rec.link,
                            "estimated": rec.estimated,
                            "verified": rec.verified,
                            "method": rec.method,
                            "identifiable": rec.identifiable,
                        }
                    )
                )
                fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write results {path}: {exc}") from None


def read_results(path) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as exc:
        raise IoError(f"cannot read results {path}: {exc}") from None
    out = []
    for ln in lines:
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"bad results line {ln!r}: {exc}") from None
        missing = {"link", "estimated", "verified", "method", "identifiable"} - set(rec)
        if missing:
            raise SchemaError(f"results line missing fields {sorted(missing)}")
        out.append(rec)
    return out


# ---------------------------------------------------------------------------
# metrics


def _format_value(name: str, value) -> str:
    if name == "connected":
        return str(int(value))
    if name in _INT_FIELDS:
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_metrics(rows: list[MetricsRow], path) -> None:
    """Fixed-header CSV, UTF-8, LF line endings, floats to 6 decimals."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for row in rows:
                writer.writerow(
                    [_format_value(n, getattr(row, n)) for n in METRICS_HEADER]
                )
    except OSError as exc:
        raise IoError(f"cannot write metrics {path}: {exc}") from None


def read_metrics(path) -> list[MetricsRow]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError("metrics file is empty (missing header)") from None
            if header != METRICS_HEADER:
                raise SchemaError(f"unexpected metrics header {header}")
            rows = []
            for raw in reader:
                if len(raw) != len(METRICS_HEADER):
                    raise SchemaError(f"metrics row width {len(raw)} != header")
                kwargs = {}
                for name, value in zip(METRICS_HEADER, raw):
                    if name == "scenario_id":
                        kwargs[name] = value
                    elif name == "connected":
                        kwargs[name] = value == "1"
                    elif name in _INT_FIELDS:
                        kwargs[name] = int(value)
                    else:
                        kwargs[name] = float(value)
                rows.append(MetricsRow(**kwargs))
            return rows
    except OSError as exc:
        raise IoError(f"cannot read metrics {path}: {exc}") from None


# Keep the dataclass and the CSV header in lockstep.
assert [f.name for f in fields(MetricsRow)] == METRICS_HEADER
