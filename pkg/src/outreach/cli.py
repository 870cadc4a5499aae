"""Command-line entry point: ``outreach {ingest,apportion,solve,sample,report}``.

Exit codes: 0 success, 1 usage or refused input, 2 solver failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import platform
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import (AssumptionViolated, BucketsFailed, BudgetExceeded, BudgetOutOfRange,
                     DigestMismatch, InfeasibleStart, NoFeasibleT, OutreachError, ParseError,
                     ValidationError, WidthOutOfRange)
from .fixtures import FIXTURES
from .layout import GENERATOR_NAME, LetterDistribution, dependent_round, distribution_digest_check, make_rng, sample
from .model import CapRule, City, ProblemInstance, validate

log = logging.getLogger("outreach")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
METHODS = ("greedy-equal", "buckets", "column-generation")
SOLVER_ERRORS = (AssumptionViolated, BucketsFailed, BudgetExceeded, BudgetOutOfRange, InfeasibleStart,
                 NoFeasibleT, WidthOutOfRange)


@dataclass
class RunConfig:
    letters: Optional[int] = None
    budget: Optional[int] = None
    method: str = "column-generation"
    target: str = "sqrt"
    small_threshold: float = 500
    large_threshold: float = 2500
    small_frac: float = 0.5
    large_frac: float = 0.1
    mid_cap: float = 250
    seed: int = 0
    deviation_scope: str = "selected_only"
    override: bool = False
    stratified: bool = False
    size_thresholds: list = field(default_factory=lambda: [20000, 100000])
    jobs: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.deviation_scope not in ("selected_only", "all_cities"):
            raise ValidationError(f"unknown deviation scope {self.deviation_scope!r}")
        self.cap_rule()

    def cap_rule(self) -> CapRule:
        try:
            return CapRule(self.small_threshold, self.large_threshold, self.small_frac, self.large_frac,
                           self.mid_cap)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None

    @classmethod
    def load(cls, path: Optional[str], overrides: dict) -> "RunConfig":
        data = {}
        if path:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
            if unknown:
                raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


# -- ingestion ----------------------------------------------------------------

def read_roster(path: str, rule: CapRule) -> list:
    """Cities from a CSV with header ``id,name,state,population``; caps by ``rule``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"id", "name", "state", "population"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ParseError(1, f"header must contain {sorted(need)}")
        cities = []
        for row in reader:
            line = reader.line_num
            try:
                pop = float(row["population"])
            except (TypeError, ValueError):
                raise ParseError(line, f"population {row['population']!r} is not a number") from None
            if not row["id"]:
                raise ParseError(line, "empty id")
            cap = rule(pop) if pop > 0 else 0.0
            cities.append(City(row["id"], row["name"], pop, cap, state=row["state"] or None))
    return cities


def load_instance(args, cfg: RunConfig) -> ProblemInstance:
    if getattr(args, "fixture", None):
        inst = FIXTURES[args.fixture]()
        if cfg.budget:
            inst = inst.with_budget(cfg.budget)
        return inst
    if getattr(args, "instance", None):
        data = json.loads(Path(args.instance).read_text(encoding="utf-8"))
        inst = ProblemInstance.from_dict(data)
        if cfg.letters and cfg.letters != inst.letters:
            inst = validate(inst.cities, cfg.letters, inst.budget)
        return inst.with_budget(cfg.budget) if cfg.budget else inst
    if getattr(args, "csv", None):
        if not cfg.letters:
            raise ValidationError("--letters is required when reading a CSV roster")
        return validate(read_roster(args.csv, cfg.cap_rule()), cfg.letters, cfg.budget or 1)
    raise ValidationError("give a roster with --csv, --instance or --fixture")


# -- artifacts ----------------------------------------------------------------

def _sha(data: str) -> str:
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


def _versions() -> dict:
    import matplotlib
    import scipy

    return {"outreach": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "matplotlib": matplotlib.__version__}


def write_artifacts(out: Path, files: dict, cfg: RunConfig, digest: str, extra: Optional[dict] = None):
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        path = out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    manifest = {
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "generator": GENERATOR_NAME,
        "instance_digest": digest,
        "artifacts": {name: _sha(text) for name, text in sorted(files.items())},
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return manifest


def solve_instance(inst: ProblemInstance, cfg: RunConfig, t: Optional[int] = None):
    """Run the configured method; returns ``(files, ok)``. Solver failures give ``ok=False``."""
    from . import report
    from .buckets import buckets, buckets_csv
    from .colgen import optimize_proportional
    from .greedy import greedy_equal_trace
    from .targets import solve_kappa

    t = t or inst.budget
    files = {}
    digest = inst.digest()
    targets = None
    try:
        targets = solve_kappa(inst, cfg.target, t)
    except WidthOutOfRange as exc:
        log.warning("no target profile at t=%s: %s", t, exc)
    layout = None
    try:
        if cfg.method == "greedy-equal":
            trace = greedy_equal_trace(inst, t, cfg.override)
            if not trace.succeeded:
                files["failure_trace.json"] = json.dumps(trace.to_dict(), indent=1)
                return files, False
            layout = trace.layout
            dist = layout.distribution
        elif cfg.method == "buckets":
            if targets is None:
                raise WidthOutOfRange(t, 0, inst.n)
            layout = buckets(inst, t, targets)
            dist = layout.distribution
            files["buckets.csv"] = buckets_csv(inst, layout)
        else:
            if targets is None:
                raise WidthOutOfRange(t, 0, inst.n)
            res = optimize_proportional(inst, t, targets, scope=cfg.deviation_scope)
            dist = res.distribution
            files["runlog.csv"] = res.state.log_csv()
    except SOLVER_ERRORS as exc:
        failure = {"error": type(exc).__name__, "message": str(exc), "t": t, "instance_digest": digest}
        if isinstance(exc, BucketsFailed):
            failure["remaining"] = exc.remaining
        files["failure_trace.json"] = json.dumps(failure, indent=1)
        return files, False
    dist = LetterDistribution(dist.entries, dist.mode, digest, tuple(inst.ids))
    files["distribution.json"] = dist.to_json()
    files["metrics.csv"] = report.metrics_csv(report.metrics(dist, inst, targets, cfg.deviation_scope))
    if targets is not None:
        files["targets.json"] = json.dumps(targets.to_dict(digest), indent=1)
        files["proportionality.svg"] = report.render(dist, "proportionality", targets)
    if layout is not None:
        files["layout.json"] = json.dumps(layout.to_dict(), indent=1)
        files["stacked.svg"] = report.render(layout, "stacked")
        files["flat.svg"] = report.render(layout, "flat")
    else:
        files["stacked.svg"] = report.render(dist, "stacked")
    return files, True


def _group_job(args):
    sub, cfg, t = args
    return solve_instance(sub, cfg, t)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_").lower()


def solve_stratified(inst: ProblemInstance, cfg: RunConfig):
    """Group, apportion, solve each group, and merge the per-group reports."""
    from .apportion import group_instance, local_vs_global_report, plan, ratio_report_csv

    t = cfg.budget or inst.budget
    gp = plan(inst, inst.letters, t, cfg.method, cfg.target, cfg.seed, cfg.jobs, cfg.size_thresholds)
    subs = [group_instance(inst, g, lg, tg) for g, lg, tg in zip(gp.groups, gp.letters, gp.budgets)]
    tasks = [(s, cfg, s.budget) for s in subs]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_group_job, tasks))
    else:
        results = [_group_job(x) for x in tasks]
    files = {"plan.csv": gp.to_csv(inst), "ratios.csv": ratio_report_csv(local_vs_global_report(gp))}
    ok_all = True
    merged = io.StringIO()
    w = csv.writer(merged, lineterminator="\n")
    w.writerow(["group", "letters_G", "t_G", "status", "metric", "value"])
    for g, lg, tg, (gfiles, ok) in zip(gp.groups, gp.letters, gp.budgets, results):
        slug = _slug(g.label)
        for name, text in gfiles.items():
            files[f"groups/{slug}/{name}"] = text
        ok_all &= ok
        if ok:
            for row in list(csv.reader(io.StringIO(gfiles["metrics.csv"])))[1:]:
                w.writerow([g.label, lg, tg, "ok"] + row)
        else:
            w.writerow([g.label, lg, tg, "failed", "", ""])
    files["metrics.csv"] = merged.getvalue()
    return files, ok_all


# -- commands -----------------------------------------------------------------

def cmd_ingest(args, cfg):
    inst = load_instance(args, cfg)
    text = json.dumps(inst.to_dict(), indent=1)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    log.info("instance %s: %d cities, %d letters", inst.digest(), inst.n, inst.letters)
    return EXIT_OK


def cmd_apportion(args, cfg):
    from .apportion import local_vs_global_report, plan, ratio_report_csv

    inst = load_instance(args, cfg)
    if not cfg.budget:
        raise ValidationError("--budget is required")
    gp = plan(inst, inst.letters, cfg.budget, cfg.method, cfg.target, cfg.seed, cfg.jobs, cfg.size_thresholds)
    files = {"plan.csv": gp.to_csv(inst), "ratios.csv": ratio_report_csv(local_vs_global_report(gp))}
    write_artifacts(Path(args.out), files, cfg, inst.digest(), {"gamma": gp.gamma})
    return EXIT_OK


def cmd_solve(args, cfg):
    inst = load_instance(args, cfg)
    if cfg.stratified:
        files, ok = solve_stratified(inst, cfg)
    else:
        files, ok = solve_instance(inst, cfg, cfg.budget or inst.budget)
    write_artifacts(Path(args.out), files, cfg, inst.digest(), {"status": "ok" if ok else "solver-failure"})
    if not ok:
        log.error("solver failed; see failure_trace.json in %s", args.out)
    return EXIT_OK if ok else EXIT_SOLVER


def draws_csv(dist: LetterDistribution, k: int, seed) -> str:
    """``k`` integral draws: pick the entry containing ``rho``, then round dependently."""
    rng = make_rng(seed)
    ids = dist.city_ids or [str(i) for i in range(dist.n)]
    letters = int(round(float(dist.entries[0][1].sum())))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["draw", "city_id", "letters"])
    for d in range(k):
        a = sample(dist, rng.random())
        a = dependent_round(a, rng, letters)
        for i in np.flatnonzero(a):
            w.writerow([d, ids[i], int(a[i])])
    return buf.getvalue()


def cmd_sample(args, cfg):
    dist = LetterDistribution.from_dict(json.loads(Path(args.distribution).read_text(encoding="utf-8")))
    if args.instance or args.fixture or args.csv:
        distribution_digest_check(dist, load_instance(args, cfg).digest())
    text = draws_csv(dist, args.k, cfg.seed)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args, cfg):
    from . import report
    from .targets import solve_kappa

    inst = load_instance(args, cfg)
    dist = LetterDistribution.from_dict(json.loads(Path(args.distribution).read_text(encoding="utf-8")))
    distribution_digest_check(dist, inst.digest())
    t = cfg.budget or max(dist.support_sizes())
    targets = solve_kappa(inst, cfg.target, t)
    files = {
        "metrics.csv": report.metrics_csv(report.metrics(dist, inst, targets, cfg.deviation_scope)),
        "stacked.svg": report.render(dist, "stacked"),
        "proportionality.svg": report.render(dist, "proportionality", targets),
    }
    write_artifacts(Path(args.out), files, cfg, inst.digest())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="outreach", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, roster=True):
        sp.add_argument("--config", help="JSON run configuration; flags win")
        if roster:
            src = sp.add_mutually_exclusive_group()
            src.add_argument("--csv", help="roster CSV (id,name,state,population)")
            src.add_argument("--instance", help="instance JSON written by ingest")
            src.add_argument("--fixture", choices=sorted(FIXTURES))
        sp.add_argument("--letters", type=int)
        sp.add_argument("--budget", "-t", type=int)
        sp.add_argument("--method", choices=METHODS)
        sp.add_argument("--target")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--deviation-scope", dest="deviation_scope", choices=("selected_only", "all_cities"))
        sp.add_argument("--jobs", type=int)

    sp = sub.add_parser("ingest", help="validate a roster and write instance JSON")
    common(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("apportion", help="split letters and budget over (state, size) groups")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_apportion)

    sp = sub.add_parser("solve", help="compute a fair distribution and write artifacts")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--override", action="store_const", const=True,
                    help="run GreedyEqual even when an oversized city's cap is below the letters")
    sp.add_argument("--stratified", action="store_const", const=True,
                    help="group, apportion, and solve each group")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sample", help="draw integral allocations from a distribution")
    common(sp)
    sp.add_argument("distribution")
    sp.add_argument("-k", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("report", help="metrics and figures for a distribution")
    common(sp)
    sp.add_argument("distribution")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_report)
    return p


_CONFIG_FLAGS = ("letters", "budget", "method", "target", "seed", "deviation_scope", "jobs", "override",
                 "stratified")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, {k: getattr(args, k, None) for k in _CONFIG_FLAGS})
        return args.func(args, cfg)
    except (DigestMismatch, ValidationError, json.JSONDecodeError, TypeError) as exc:
        print(f"outreach: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"outreach: {exc}", file=sys.stderr)
        return EXIT_IO
    except OutreachError as exc:
        print(f"outreach: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
