"""Command-line harness: single scenarios and batch campaigns.

Subcommands ``simulate``, ``estimate``, and ``verify`` run one scenario end
to end through files; ``campaign`` runs the full randomized protocol
(areas x failure sets per |F| setting) and writes per-trial metrics plus
per-link verdict ledgers; ``report`` folds a metrics CSV into aggregate
tables (mean and 25th/75th nearest-rank percentiles per |F|) ready for
plotting.  Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import caseio
from .attack import (
    InsufficientLinks,
    compute_post_attack,
    generate_attack_area,
    sample_failures,
)
from .fld import (
    DEFAULT_ETA,
    InfeasibleModel,
    estimate,
    estimate_connected,
    observe,
)
from .grid import (
    SingularSystem,
    UnbalancedInjection,
    enumerate_cuts,
    induced_subgraph,
    solve_dc_power_flow,
)
from .lp import NumericalFailure
from .verifier import (
    algorithm1,
    algorithm2,
    guaranteed_by_gale,
    identifiable_links,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "AggregateRow",
    "AGGREGATE_HEADER",
    "run_trial",
    "run_campaign",
    "aggregate",
    "write_aggregates",
    "report",
    "main",
]

MODES = ("general", "connected-known")

AGGREGATE_HEADER = ["n_failed", "metric", "trials", "mean", "p25", "p75"]


class ConfigError(ValueError):
    """Bad flag, config file, or parameter value."""


@dataclass(frozen=True)
class RunConfig:
    """Everything a campaign needs; field names double as config-file keys."""

    case: str
    area_size: int = 20
    failures: tuple[int, ...] = (2, 4, 6, 8)
    trials_h: int = 30
    trials_f: int = 35
    eta: float = DEFAULT_ETA
    mode: str = "general"
    seed: int = 0
    out: str = "runs"
    workers: int = 0  # 0 = one per CPU

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta {self.eta} outside (0, 1)")
        if self.area_size < 1:
            raise ConfigError(f"area size {self.area_size} < 1")
        if self.trials_h < 1 or self.trials_f < 1:
            raise ConfigError("trial counts must be >= 1")
        if not self.failures:
            raise ConfigError("need at least one |F| value")
        if any(k < 0 for k in self.failures):
            raise ConfigError(f"negative failure count in {self.failures}")
        if self.mode not in MODES:
            raise ConfigError(f"mode {self.mode!r} not in {MODES}")
        if self.seed < 0:
            raise ConfigError(f"master seed {self.seed} must be >= 0")
        if self.workers < 0:
            raise ConfigError(f"worker count {self.workers} must be >= 0")


# ---------------------------------------------------------------------------
# single trial

# Seeds are derived from (master, setting, area, draw) tuples rather than
# sequential spawning so the stream of any trial is independent of worker
# count and completion order.


def _area_seed(master: int, ki: int, hi: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(master, ki, hi, 0))


def _fail_seed(master: int, ki: int, hi: int, fi: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(master, ki, hi, fi + 1))


@dataclass(frozen=True)
class TrialSpec:
    scenario_id: str
    k: int
    ki: int
    hi: int
    fi: int
    area_size: int
    eta: float
    mode: str
    master: int


@dataclass(frozen=True)
class TrialResult:
    scenario_id: str
    k: int
    connected: bool | None = None  # None: failed before the flag was known
    row: caseio.MetricsRow | None = None
    ledger_rows: list[dict] | None = None
    verified_wrong: int = 0
    numerical_failures: int = 0
    error: str | None = None


def run_trial(topology, theta_pre, spec: TrialSpec) -> TrialResult:
    """Simulate, estimate, verify, and score one (area, failure set) draw.

    All counts and both estimator ratios are over identifiable links only;
    non-identifiable links are recoverable from the row as n_failed minus
    n_identifiable_failed (and likewise for operational links).  Empty
    denominators make precision/recall 1.0 (nothing was gotten wrong).
    In connected-known mode a trial whose post-attack grid split is
    skipped: the result carries the connectivity flag but no row.
    """
    connmode = spec.mode == "connected-known"
    area = generate_attack_area(
        topology, spec.area_size, _area_seed(spec.master, spec.ki, spec.hi)
    )
    scen = sample_failures(
        area, spec.k, _fail_seed(spec.master, spec.ki, spec.hi, spec.fi)
    )
    post = compute_post_attack(topology, scen)
    connected = len(post.island_partition) == 1
    if connmode and not connected:
        return TrialResult(spec.scenario_id, spec.k, connected=False)

    obs = observe(topology, scen, theta_pre, post)
    est = (estimate_connected if connmode else estimate)(obs, spec.eta)
    catalog = enumerate_cuts(induced_subgraph(topology, set(scen.v_h)))
    ledger = algorithm1(obs, est, catalog, spec.eta, connected=connmode)
    alg1_verified = {e for e, r in ledger.records.items() if r.verified}
    ledger = algorithm2(obs, est, ledger, spec.eta, connected=connmode)

    ident = identifiable_links(obs)
    failed = scen.f
    ident_failed = ident & failed
    ident_oper = ident - failed
    cut_links = set(catalog.bridges)
    for pair in catalog.two_edge_cuts:
        cut_links.update(pair)

    delta_true = {
        v: float(post.delta[topology.node_pos(v)]) for v in obs.area_nodes()
    }
    guaranteed = set()
    lp_breakdowns = ledger.numerical_failures
    for e in sorted(ident):
        try:
            if guaranteed_by_gale(
                e, obs, failed, delta_true, spec.eta, connected=connmode
            ):
                guaranteed.add(e)
        except NumericalFailure:
            lp_breakdowns += 1

    verified = {e for e, r in ledger.records.items() if r.verified}
    alg2_added = {
        e for e in verified - alg1_verified if ledger.records[e].method == "alg2-lp"
    }
    wrong = sum(
        1
        for e in verified
        if (ledger.records[e].estimated == "failed") != (e in failed)
    )

    f_hat_ident = est.f_hat & ident
    tp = len(f_hat_ident & failed)
    precision = tp / len(f_hat_ident) if f_hat_ident else 1.0
    recall = tp / len(ident_failed) if ident_failed else 1.0

    row = caseio.MetricsRow(
        scenario_id=spec.scenario_id,
        area_size=len(scen.v_h),
        n_links=len(scen.e_h),
        n_failed=len(failed),
        connected=connected,
        n_identifiable_failed=len(ident_failed),
        n_identifiable_operational=len(ident_oper),
        testable_failed=len(cut_links & ident_failed),
        verified_failed=len(verified & ident_failed),
        testable_operational=len(cut_links & ident_oper),
        verified_operational=len(verified & ident_oper),
        alg2_added_failed=len(alg2_added & failed),
        alg2_added_operational=len(alg2_added - failed),
        guaranteed_failed=len(guaranteed & failed),
        guaranteed_operational=len(guaranteed - failed),
        precision=precision,
        recall=recall,
    )
    ledger_rows = [
        {
            "link": r.link,
            "estimated": r.estimated,
            "verified": r.verified,
            "method": r.method,
            "identifiable": r.identifiable,
        }
        for r in ledger.rows()
    ]
    return TrialResult(
        spec.scenario_id,
        spec.k,
        connected=connected,
        row=row,
        scenario=scen,
        ledger_rows=ledger_rows,
        verified_wrong=wrong,
        numerical_failures=lp_breakdowns,
    )


# ---------------------------------------------------------------------------
# campaign

_WORKER_STATE: tuple | None = None


def _init_worker(case_path: str) -> None:
    global _WORKER_STATE
    top = caseio.parse_case_file(case_path)
    _WORKER_STATE = (top, solve_dc_power_flow(top, top.injections))


def _run_spec(spec: TrialSpec) -> TrialResult:
    top, theta_pre = _WORKER_STATE
    try:
        return run_trial(top, theta_pre, spec)
    except Exception as exc:  # logged by the collector, never fatal
        return TrialResult(spec.scenario_id, spec.k, error=repr(exc))


def _specs_for(config: RunConfig) -> list[TrialSpec]:
    return [
        TrialSpec(
            scenario_id=f"k{k:02d}-h{hi:03d}-f{fi:03d}",
            k=k,
            ki=ki,
            hi=hi,
            fi=fi,
            area_size=config.area_size,
            eta=config.eta,
            mode=config.mode,
            master=config.seed,
        )
        for ki, k in enumerate(config.failures)
        for hi in range(config.trials_h)
        for fi in range(config.trials_f)
    ]


def run_campaign(config: RunConfig) -> tuple[list[caseio.MetricsRow], dict]:
    """Run the full protocol and write metrics, aggregates, and ledgers.

    Output directory gains ``metrics.csv`` (one row per completed trial, in
    spec order), ``aggregates.csv`` (the same fold ``report`` performs),
    ``summary.json`` (config echo, per-|F| connectivity accounting, error
    log), and ``ledgers/<scenario_id>.jsonl`` with per-link verdicts.
    Per-trial failures are recorded in the summary and never abort the
    campaign.  Returns the metrics rows and the summary document.
    """
    top = caseio.parse_case_file(config.case)
    if config.area_size > top.n_nodes:
        raise ConfigError(
            f"area size {config.area_size} exceeds the case's {top.n_nodes} nodes"
        )

    out_dir = Path(config.out)
    ledger_dir = out_dir / "ledgers"
    try:
        ledger_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise caseio.IoError(f"cannot create output directory {out_dir}: {exc}")

    specs = _specs_for(config)
    workers = config.workers or os.cpu_count() or 1
    if workers > 1:
        pool = ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(config.case,),
        )
        chunk = max(1, len(specs) // (workers * 8))
        results = pool.map(_run_spec, specs, chunksize=chunk)
    else:
        pool = None
        _init_worker(config.case)
        results = map(_run_spec, specs)

    rows: list[caseio.MetricsRow] = []
    stats = {
        k: {"attempted": 0, "simulated": 0, "connected": 0, "rows": 0, "errors": 0}
        for k in config.failures
    }
    errors: list[dict] = []
    verified_wrong = 0
    numerical_failures = 0
    try:
        for res in results:
            s = stats[res.k]
            s["attempted"] += 1
            if res.error is not None:
                s["errors"] += 1
                errors.append({"scenario_id": res.scenario_id, "error": res.error})
                continue
            s["simulated"] += 1
            if res.connected:
                s["connected"] += 1
            if res.row is None:
                continue  # connected-known mode skipped a split grid
            s["rows"] += 1
            rows.append(res.row)
            verified_wrong += res.verified_wrong
            numerical_failures += res.numerical_failures
            _write_ledger_rows(
                res.ledger_rows, ledger_dir / f"{res.scenario_id}.jsonl"
            )
    finally:
        if pool is not None:
            pool.shutdown()

    caseio.write_metrics(rows, out_dir / "metrics.csv")
    write_aggregates(aggregate(rows), out_dir / "aggregates.csv")
    summary = {
        "config": {**asdict(config), "failures": list(config.failures)},
        "per_failures": [
            {
                "n_failed": k,
                **stats[k],
                "connected_fraction": round(
                    stats[k]["connected"] / stats[k]["simulated"], 6
                )
                if stats[k]["simulated"]
                else 0.0,
            }
            for k in config.failures
        ],
        "verified_wrong": verified_wrong,
        "numerical_failures": numerical_failures,
        "errors": errors,
    }
    try:
        with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise caseio.IoError(f"cannot write summary: {exc}")
    return rows, summary


def _write_ledger_rows(ledger_rows: list[dict], path: Path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in ledger_rows:
                fh.write(json.dumps(rec))
                fh.write("\n")
    except OSError as exc:
        raise caseio.IoError(f"cannot write results {path}: {exc}")


# ---------------------------------------------------------------------------
# aggregation (the report fold)


@dataclass(frozen=True)
class AggregateRow:
    n_failed: int
    metric: str
    trials: int
    mean: float
    p25: float
    p75: float


def _frac(num: int, den: int) -> float | None:
    return num / den if den else None


# Per-trial values aggregated per |F|; None drops the trial from that metric.
_AGG_METRICS = [
    ("testable_failed_frac", lambda r: _frac(r.testable_failed, r.n_identifiable_failed)),
    ("verified_failed_frac", lambda r: _frac(r.verified_failed, r.n_identifiable_failed)),
    ("guaranteed_failed_frac", lambda r: _frac(r.guaranteed_failed, r.n_identifiable_failed)),
    ("testable_operational_frac", lambda r: _frac(r.testable_operational, r.n_identifiable_operational)),
    ("verified_operational_frac", lambda r: _frac(r.verified_operational, r.n_identifiable_operational)),
    ("guaranteed_operational_frac", lambda r: _frac(r.guaranteed_operational, r.n_identifiable_operational)),
    ("precision", lambda r: r.precision),
    ("recall", lambda r: r.recall),
    ("alg2_added_any", lambda r: 1.0 if r.alg2_added_failed + r.alg2_added_operational else 0.0),
    ("connected", lambda r: 1.0 if r.connected else 0.0),
]


def _nearest_rank(sorted_values: list[float], pct: float) -> float:
    rank = math.ceil(pct / 100.0 * len(sorted_values))
    return sorted_values[max(rank, 1) - 1]


def aggregate(rows: list[caseio.MetricsRow]) -> list[AggregateRow]:
    """Mean and 25th/75th nearest-rank percentiles of each metric per |F|.

    A pure fold over the rows: recomputing from the metrics CSV reproduces
    the campaign's own aggregates exactly.  Metrics undefined on every
    trial of a setting (e.g. failed-link fractions at |F| = 0) are omitted.
    """
    out: list[AggregateRow] = []
    for k in sorted({r.n_failed for r in rows}):
        group = [r for r in rows if r.n_failed == k]
        for name, extract in _AGG_METRICS:
            values = sorted(v for r in group if (v := extract(r)) is not None)
            if not values:
                continue
            out.append(
                AggregateRow(
                    n_failed=k,
                    metric=name,
                    trials=len(values),
                    mean=sum(values) / len(values),
                    p25=_nearest_rank(values, 25.0),
                    p75=_nearest_rank(values, 75.0),
                )
            )
    return out


def write_aggregates(agg: list[AggregateRow], path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(AGGREGATE_HEADER)
            for row in agg:
                writer.writerow(
                    [
                        row.n_failed,
                        row.metric,
                        row.trials,
                        f"{row.mean:.6f}",
                        f"{row.p25:.6f}",
                        f"{row.p75:.6f}",
                    ]
                )
    except OSError as exc:
        raise caseio.IoError(f"cannot write aggregates {path}: {exc}")


def report(metrics_path, out_dir=None) -> list[AggregateRow]:
    """Fold an existing metrics CSV into ``aggregates.csv`` next to it."""
    rows = caseio.read_metrics(metrics_path)
    agg = aggregate(rows)
    target = Path(out_dir) if out_dir else Path(metrics_path).parent
    target.mkdir(parents=True, exist_ok=True)
    write_aggregates(agg, target / "aggregates.csv")
    return agg


# ---------------------------------------------------------------------------
# config files


_CONFIG_KEYS = frozenset(RunConfig.__dataclass_fields__)


def _load_config_file(path: Path) -> dict:
    if path.suffix.lower() == ".toml":
        if sys.version_info < (3, 11):
            raise ConfigError(
                "TOML configs need Python 3.11+ (stdlib tomllib); use JSON here"
            )
        import tomllib

        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML config {path}: {exc}")
    else:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a table/object at top level")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    return data


def _campaign_config(ns: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if ns.config:
        data.update(_load_config_file(Path(ns.config)))
    overrides = {
        "case": ns.case,
        "area_size": ns.area_size,
        "failures": ns.failures,
        "trials_h": ns.trials_h,
        "trials_f": ns.trials_f,
        "eta": ns.eta,
        "mode": ns.mode,
        "seed": ns.seed,
        "out": ns.out,
        "workers": ns.workers,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data.setdefault("case", caseio.bundled_case_path())
    if "failures" in data:
        try:
            data["failures"] = tuple(int(k) for k in data["failures"])
        except (TypeError, ValueError):
            raise ConfigError(f"failures must be a list of ints, got {data['failures']!r}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc))


# ---------------------------------------------------------------------------
# subcommands


def _single_scenario(ns: argparse.Namespace):
    """Shared front half of estimate/verify: load, simulate, observe."""
    top = caseio.parse_case_file(ns.case)
    scen, case_id = caseio.read_scenario(ns.scenario, top)
    if case_id != Path(ns.case).name:
        print(
            f"note: scenario was written for case {case_id!r}", file=sys.stderr
        )
    theta_pre = solve_dc_power_flow(top, top.injections)
    post = compute_post_attack(top, scen)
    obs = observe(top, scen, theta_pre, post)
    connmode = ns.mode == "connected-known"
    est = (estimate_connected if connmode else estimate)(obs, ns.eta)
    return top, scen, post, obs, est, connmode


def _cmd_simulate(ns: argparse.Namespace) -> int:
    top = caseio.parse_case_file(ns.case)
    if ns.area_size > top.n_nodes:
        raise ConfigError(
            f"area size {ns.area_size} exceeds the case's {top.n_nodes} nodes"
        )
    if ns.seed < 0:
        raise ConfigError(f"seed {ns.seed} must be >= 0")
    area = generate_attack_area(top, ns.area_size, _area_seed(ns.seed, 0, 0))
    scen = sample_failures(area, ns.failures, _fail_seed(ns.seed, 0, 0, 0))
    scen = replace(scen, seed=ns.seed)
    post = compute_post_attack(top, scen)
    connected = len(post.island_partition) == 1
    print(f"area nodes: {len(scen.v_h)}  area links: {len(scen.e_h)}")
    print(f"failed links: {sorted(scen.f)}")
    print(f"post-attack islands: {len(post.island_partition)}"
          f" ({'connected' if connected else 'split'})")
    print(f"total shed power: {float(np.abs(post.delta).sum()) / 2.0:.6f}")
    if ns.out:
        caseio.write_scenario(scen, Path(ns.case).name, ns.out)
        print(f"wrote {ns.out}")
    return 0


def _cmd_estimate(ns: argparse.Namespace) -> int:
    top, scen, post, obs, est, connmode = _single_scenario(ns)
    for link, x in zip(est.link_order, est.x_h):
        state = "failed" if link in est.f_hat else "operational"
        print(f"link {link:4d}  x = {x:8.6f}  {state}")
    print(f"estimated failed set: {sorted(est.f_hat)}")
    if ns.out:
        doc = {
            "eta": est.eta,
            "mode": ns.mode,
            "links": [
                {
                    "link": link,
                    "x": round(float(x), 9),
                    "estimated": "failed" if link in est.f_hat else "operational",
                }
                for link, x in zip(est.link_order, est.x_h)
            ],
            "delta": {
                str(node): round(float(d), 9)
                for node, d in zip(est.node_order, est.delta_h_est)
            },
        }
        try:
            with open(ns.out, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise caseio.IoError(f"cannot write estimate {ns.out}: {exc}")
        print(f"wrote {ns.out}")
    return 0


def _cmd_verify(ns: argparse.Namespace) -> int:
    top, scen, post, obs, est, connmode = _single_scenario(ns)
    catalog = enumerate_cuts(induced_subgraph(top, set(scen.v_h)))
    ledger = algorithm1(obs, est, catalog, ns.eta, connected=connmode)
    ledger = algorithm2(obs, est, ledger, ns.eta, connected=connmode)
    n_verified = 0
    for rec in ledger.rows():
        tag = rec.method if rec.verified else (
            "" if rec.identifiable else "not identifiable"
        )
        mark = "verified" if rec.verified else "unverified"
        n_verified += rec.verified
        print(f"link {rec.link:4d}  {rec.estimated:11s}  {mark:10s}  {tag}")
    print(f"verified {n_verified} of {len(ledger.records)} area links")
    if ledger.numerical_failures:
        print(f"solver breakdowns: {ledger.numerical_failures}", file=sys.stderr)
    if ns.out:
        caseio.write_results(ledger, scen, ns.out)
        print(f"wrote {ns.out}")
    return 0


def _cmd_campaign(ns: argparse.Namespace) -> int:
    config = _campaign_config(ns)
    started = time.monotonic()
    rows, summary = run_campaign(config)
    elapsed = time.monotonic() - started
    for entry in summary["per_failures"]:
        print(
            f"|F| = {entry['n_failed']}: {entry['rows']} rows,"
            f" connected fraction {entry['connected_fraction']:.4f},"
            f" errors {entry['errors']}"
        )
    if summary["errors"]:
        print(f"{len(summary['errors'])} trial(s) failed; see summary.json",
              file=sys.stderr)
    print(f"wrote {Path(config.out) / 'metrics.csv'} ({len(rows)} rows)"
          f" in {elapsed:.1f}s")
    return 0


def _cmd_report(ns: argparse.Namespace) -> int:
    agg = report(ns.metrics, ns.out)
    target = Path(ns.out) if ns.out else Path(ns.metrics).parent
    print(f"wrote {target / 'aggregates.csv'} ({len(agg)} rows)")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """argparse reports usage errors via exit(2); remap them to exit 1."""

    def error(self, message):
        raise ConfigError(message)


def _add_common(sub: argparse.ArgumentParser, *, eta_default=DEFAULT_ETA) -> None:
    sub.add_argument("--case", default=caseio.bundled_case_path(),
                     help="case file (.m or JSON mirror); default: bundled 300-bus case")
    sub.add_argument("--eta", type=float, default=eta_default,
                     help="rounding threshold in (0, 1)")
    sub.add_argument("--mode", choices=MODES, default="general",
                     help="estimator/verifier variant")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridverify", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", parser_class=_Parser,
                          help="draw an attacked area and failure set, write a scenario file")
    sim.add_argument("--case", default=caseio.bundled_case_path())
    sim.add_argument("--area-size", type=int, default=20)
    sim.add_argument("--failures", type=int, default=2, metavar="K",
                     help="number of links to fail")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", help="scenario JSON path")
    sim.set_defaults(func=_cmd_simulate)

    for name, fn, text in (
        ("estimate", _cmd_estimate, "estimate link states for a scenario file"),
        ("verify", _cmd_verify, "estimate and certify link states for a scenario file"),
    ):
        sub = subs.add_parser(name, parser_class=_Parser, help=text)
        _add_common(sub)
        sub.add_argument("--scenario", required=True, help="scenario JSON path")
        sub.add_argument("--out", help="output path"
                         + (" (verdicts, JSON lines)" if name == "verify" else " (JSON)"))
        sub.set_defaults(func=fn)

    camp = subs.add_parser("campaign", parser_class=_Parser,
                           help="run the randomized batch protocol")
    camp.add_argument("--config", help="JSON (or, on Python 3.11+, TOML) config file")
    camp.add_argument("--case", default=None)
    camp.add_argument("--area-size", type=int, default=None, dest="area_size")
    camp.add_argument("--failures", type=int, nargs="+", default=None, metavar="K")
    camp.add_argument("--trials-h", type=int, default=None, dest="trials_h",
                      help="areas per |F| setting")
    camp.add_argument("--trials-f", type=int, default=None, dest="trials_f",
                      help="failure draws per area")
    camp.add_argument("--eta", type=float, default=None)
    camp.add_argument("--mode", choices=MODES, default=None)
    camp.add_argument("--seed", type=int, default=None)
    camp.add_argument("--out", default=None, help="output directory")
    camp.add_argument("--workers", type=int, default=None,
                      help="worker processes (0 = one per CPU)")
    camp.set_defaults(func=_cmd_campaign)

    rep = subs.add_parser("report", parser_class=_Parser,
                          help="fold a metrics CSV into aggregate tables")
    rep.add_argument("--metrics", required=True, help="metrics CSV path")
    rep.add_argument("--out", help="output directory (default: alongside the CSV)")
    rep.set_defaults(func=_cmd_report)
    return parser


_DATA_ERRORS = (
    caseio.ParseError,
    caseio.SchemaError,
    InfeasibleModel,
    InsufficientLinks,
    UnbalancedInjection,
    SingularSystem,
    NumericalFailure,
    OSError,  # includes caseio.IoError
)


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
