"""Command-line front end: ``verify``, ``tightspan`` and ``plot``.

Exit codes: 0 when everything passed, 1 when a check failed, 2 on usage
errors (bad config, unknown space or check, unreadable input).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import tightspan
from .errors import ConfigurationError, DomainError
from .suite import CHECKS, FLOAT_OPTIONS, INT_OPTIONS, LIST_OPTIONS, known_space, run_check

log = logging.getLogger("bicomb_lab")

SCHEMA_VERSION = 1
SUMMARY_COLUMNS = ("id", "check", "space", "seed", "n", "tol", "max_violation", "passed", "mode", "checks_run",
                   "skipped", "report")
OUT_ENV = "BICOMB_LAB_OUT"


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# -- configuration --------------------------------------------------------------


def _typed(key: str, raw: str):
    try:
        if key in INT_OPTIONS:
            return int(raw)
        if key in FLOAT_OPTIONS:
            v = float(raw)
            if key in ("tol", "quad_tol") and not v > 0:
                raise UsageError(f"{key} must be positive, got {raw}")
            return v
        if key in LIST_OPTIONS:
            return [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"option {key} = {raw!r} is not a number") from None
    return raw


def parse_config(text: str) -> tuple[dict, list[tuple[str, str, dict]]]:
    """Returns the ``[run]`` options and ``(section id, check name, options)`` per check section."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # option names are case sensitive (beta, L, delta)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"config does not parse: {exc}") from None
    run = dict(cp["run"]) if cp.has_section("run") else {}
    run_opts = {"out": run.get("out"), "workers": _typed("workers", run.get("workers", "1"))}
    unknown = set(run) - {"out", "workers"}
    if unknown:
        raise UsageError(f"unknown [run] options: {sorted(unknown)}")
    checks = []
    for sec in cp.sections():
        if sec == "run":
            continue
        opts = dict(cp[sec])
        name = opts.pop("check", None)
        if name not in CHECKS:
            raise UsageError(f"[{sec}]: unknown check {name!r}; known: {sorted(CHECKS)}")
        check = CHECKS[name]
        bad = set(opts) - set(check.options)
        if bad:
            raise UsageError(f"[{sec}]: options {sorted(bad)} are not accepted by {name}")
        if check.needs_space and "space" not in opts:
            raise UsageError(f"[{sec}]: check {name} needs a space")
        if "space" in opts and not known_space(opts["space"]):
            raise UsageError(f"[{sec}]: unknown space {opts['space']!r}")
        checks.append((sec, name, {k: _typed(k, v) for k, v in opts.items()}))
    if not checks:
        raise UsageError("config requests no checks")
    return run_opts, checks


def _load_config_text(path: Path) -> str:
    """A config file, or the config embedded in a run manifest."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None
    if path.suffix == ".json":
        try:
            return json.loads(text)["config"]
        except (ValueError, KeyError, TypeError):
            raise UsageError(f"{path} is not a run manifest") from None
    return text


# -- verify -----------------------------------------------------------------------


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_verify(config: str, out: str | None = None, workers: int | None = None) -> int:
    text = _load_config_text(Path(config))
    run_opts, checks = parse_config(text)
    out_dir = Path(out or run_opts["out"] or os.environ.get(OUT_ENV, "reports"))
    workers = workers if workers is not None else run_opts["workers"]
    (out_dir / "reports").mkdir(parents=True, exist_ok=True)
    rows, refs = [], []
    for sec, name, opts in checks:
        log.info("running [%s] %s", sec, name)
        try:
            rep = run_check(name, {**opts, "workers": workers})
        except (ConfigurationError, DomainError) as exc:
            raise UsageError(f"[{sec}]: {exc}") from None
        d = rep.to_dict()
        d["schema_version"] = SCHEMA_VERSION
        d["id"] = sec
        rel = f"reports/{sec}.json"
        (out_dir / rel).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
        refs.append(rel)
        rows.append({"id": sec, "check": name, "space": rep.space, "seed": rep.seed, "n": rep.n, "tol": rep.tol,
                     "max_violation": rep.max_violation, "passed": rep.passed, "mode": rep.mode,
                     "checks_run": rep.checks_run, "skipped": rep.skipped, "report": rel})
        print(f"{'PASS' if rep.passed else 'FAIL'} [{sec}] {name} on {rep.space}: "
              f"max violation {rep.max_violation:.3e} (tol {rep.tol:.1e})")
    (out_dir / "summary.csv").write_text(summary_csv(rows))
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": _version(),
        "config_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "config": text,
        "workers": workers,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "reports": refs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0 if all(r["passed"] for r in rows) else 1


# -- tightspan ----------------------------------------------------------------------


def cmd_tightspan(graph: str, samples: int = 20, seed: int = 0, out: str | None = None) -> int:
    try:
        text = Path(graph).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {graph}: {exc}") from None
    try:
        edges, n = tightspan.parse_edge_list(text)
        if n == 0:
            raise UsageError(f"{graph} contains no edges")
        d = tightspan.graph_metric(edges, n)
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    delta = tightspan.four_point_delta(d)
    rep = tightspan.covering_radius_check(d, delta, samples, seed)
    rng = np.random.default_rng(seed)
    points = [tightspan.project_extremal(tightspan.random_admissible(d, rng), d, tol=1e-13, max_iter=10_000)
              for _ in range(min(samples, 5))]
    result = {
        "n": d.n,
        "delta": str(delta),
        "metric_csv": d.to_csv(),
        "extremal_samples": [[float(v) for v in p] for p in points],
        "covering_radius": rep.to_dict(),
    }
    if d.n == 3 or delta == 0:
        try:
            tree, _ = tightspan.tree_tight_span(d)
            result["tree"] = {"nodes": tree.size, "edges": [list(e) for e in tree.edges],
                              "point_node": list(tree.point_node)}
        except Exception as exc:  # noqa: BLE001 - the tree is informational
            log.warning("tree reconstruction failed: %s", exc)
    print(f"points: {d.n}")
    print(f"four-point delta: {delta}")
    if "tree" in result:
        print(f"tight span is a tree with {result['tree']['nodes']} nodes")
    print(f"{'PASS' if rep.passed else 'FAIL'} covering radius: max violation {rep.max_violation:.3e}")
    if out:
        o = Path(out)
        o.mkdir(parents=True, exist_ok=True)
        (o / "metric.csv").write_text(d.to_csv())
        (o / "tightspan.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    else:
        print(d.to_csv(), end="")
    return 0 if rep.passed else 1


# -- plot ---------------------------------------------------------------------------


def _load_report(path: str) -> dict:
    try:
        rep = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read report {path}: {exc}") from None
    if not isinstance(rep, dict) or not {"check", "max_violation", "tol"} <= set(rep):
        raise UsageError(f"{path} is not a property report")
    return rep


def cmd_plot(reports: list[str], out: str) -> int:
    if not reports:
        raise UsageError("no reports given")
    loaded = [(Path(p).stem, _load_report(p)) for p in reports]
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    o = Path(out)
    o.mkdir(parents=True, exist_ok=True)
    written = []

    def save(fig, name):
        fig.savefig(o / name, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(name)

    for stem, rep in loaded:
        extra = rep.get("extra") or {}
        for i, curve in enumerate(c for c in extra.get("curves") or [] if c):
            fig, ax = plt.subplots()
            ax.plot(curve["t"], curve["residual"])
            ax.axhline(0.0, color="k", lw=0.5)
            ax.set_xlabel("t")
            ax.set_ylabel("distance - bound")
            ax.set_title(f"{rep['check']} instance {i}")
            save(fig, f"{stem}-curve{i}.svg")
        if extra.get("sweep"):
            rows = sorted(extra["sweep"], key=lambda r: r["delta"])
            fig, ax = plt.subplots()
            ax.loglog([r["delta"] for r in rows], [r["T"] for r in rows], marker="o")
            ax.set_xlabel("delta")
            ax.set_ylabel("T")
            ax.set_title(f"recipe constants, beta={extra.get('beta')}, L={extra.get('L')}")
            save(fig, f"{stem}-constants.svg")
        if extra.get("violations"):
            fig, ax = plt.subplots()
            ax.hist(extra["violations"], bins=40)
            ax.axvline(rep["tol"], color="r", lw=1)
            ax.set_xlabel("violation")
            ax.set_ylabel("samples")
            ax.set_title(f"{rep['check']} on {rep.get('space')}")
            save(fig, f"{stem}-hist.svg")
    for name in written:
        print(o / name)
    return 0


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bicomb-lab", description="Property sweeps for bicombed spaces.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run the checks listed in a config file (or a run manifest)")
    v.add_argument("config")
    v.add_argument("--out", help=f"output directory (default: [run] out, then ${OUT_ENV}, then ./reports)")
    v.add_argument("--workers", type=int)
    t = sub.add_parser("tightspan", help="finite metric, delta and covering radius of a graph")
    t.add_argument("graph")
    t.add_argument("--samples", type=int, default=20)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    pl = sub.add_parser("plot", help="SVG plots from report files")
    pl.add_argument("reports", nargs="*")
    pl.add_argument("--out", required=True)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.cmd == "verify":
            return cmd_verify(args.config, args.out, args.workers)
        if args.cmd == "tightspan":
            return cmd_tightspan(args.graph, args.samples, args.seed, args.out)
        return cmd_plot(args.reports, args.out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
