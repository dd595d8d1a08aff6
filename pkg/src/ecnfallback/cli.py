"""Command line: run, matrix, calibrate and verify.

Scenario flags mirror ScenarioConfig fields (``--rate-mbps 40``). The output
directory and worker count can also come from ECNFALLBACK_OUT and
ECNFALLBACK_JOBS.
"""

import argparse
import itertools
import os
import sys
from dataclasses import fields
from pathlib import Path

from .netsim import ConfigError, ScenarioConfig, load_config, run
from .netsim.scenario import coerce_field

OUT_ENV = "ECNFALLBACK_OUT"
JOBS_ENV = "ECNFALLBACK_JOBS"


def _env_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="scenario file with a [scenario] section")
    for f in fields(ScenarioConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None, metavar="V")


def _scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    kw = {}
    for f in fields(ScenarioConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            kw[f.name] = coerce_field(f.name, raw)
    return cfg.with_(**kw).validate()


def _out_dir(args, default: str) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or default)


def cmd_run(args) -> int:
    from .lab import csvout
    from .lab.verdict import bundle_verdict
    cfg = _scenario(args)
    b = run(cfg)
    out = _out_dir(args, os.path.join("out", cfg.label()))
    csvout.write_bundle(b, out)
    v = bundle_verdict(b)
    print(f"{cfg.label()}: {v}; utilization {b.utilization:.3f}; "
          f"{b.summary['packets']} packets; csv in {out}")
    for fid, score in sorted(b.final_scores("prague").items()):
        if b.flows[fid].long:
            print(f"  flow {fid} final score {score:.2f}")
    return 0


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x)


def cmd_matrix(args) -> int:
    from .lab import csvout
    from .lab.matrix import (DESK_PATTERNS, build_grid, full_grid, run_matrix, tally)
    base = _scenario(args)
    aqms = tuple(a for a in args.aqms.split(",") if a)
    if args.full:
        cells = full_grid(aqms, base, args.base_seed)
    else:
        patterns = DESK_PATTERNS
        if args.patterns:
            patterns = tuple(tuple(p.split(":")) for p in args.patterns.split(","))
        cells = build_grid(aqms, _floats(args.rates), _floats(args.rtts), patterns, base,
                           args.base_seed)
    jobs = args.jobs or _env_jobs()
    results = run_matrix(cells, jobs)
    out = _out_dir(args, "out")
    path = csvout.write_matrix(results, out / "matrix.csv")
    for r in results:
        state = r.error or f"{r.color.name:5s} prague {r.prague.mean:5.2f} cubic {r.cubic.mean:5.2f}"
        print(f"{r.label:36s} {state}")
    counts = tally(results)
    print(" ".join(f"{k}={v}" for k, v in counts.items()), f"-> {path}")
    return 0 if counts["ERROR"] == 0 else 1


def cmd_calibrate(args) -> int:
    """Sweep V0, D0 and the mdev gain offset over a Classic and an L4S scenario."""
    import numpy as np

    from .lab.csvout import write_rows
    from .lab.matrix import pmap
    base = _scenario(args)
    grid = list(itertools.product(_floats(args.sweep_v0), _floats(args.sweep_d0),
                                  [int(x) for x in args.sweep_g_diff.split(",")]))
    classic = base.with_(aqm="codel", rate_mbps=12, rtt_ms=50, prague="1", cubic="1")
    l4s = base.with_(aqm="dualpi2", rate_mbps=40, rtt_ms=10, prague="1", cubic="1")
    cfgs = []
    for v0, d0, gd in grid:
        kw = dict(v0_us=int(v0), d0_us=int(d0), g_diff=gd)
        cfgs += [classic.with_(**kw), l4s.with_(**kw)]
    results = pmap(_calibrate_one, cfgs, args.jobs or _env_jobs())
    rows = []
    for i, (v0, d0, gd) in enumerate(grid):
        t_classic, _ = results[2 * i]
        _, peak = results[2 * i + 1]
        rows.append((int(v0), int(d0), gd, t_classic, peak))
        tc = "never" if np.isnan(t_classic) else f"{t_classic:.2f}s"
        print(f"V0={int(v0):5d}us D0={int(d0):5d}us g_diff={gd}: CoDel classic after {tc}, "
              f"DualPI2 peak score {peak:.2f}")
    out = _out_dir(args, "out")
    out.mkdir(parents=True, exist_ok=True)
    path = write_rows(out / "calibrate.csv",
                  ("v0_us", "d0_us", "g_diff", "codel_classic_s", "dualpi2_peak_score"), rows)
    print(f"-> {path}")
    return 0


def _calibrate_one(cfg: ScenarioConfig):
    import numpy as np
    b = run(cfg)
    fid = b.flow_ids("prague", long=True)[0]
    t, s = b.score_trace(fid)
    hit = np.flatnonzero(s >= 1.0)
    start = b.flows[fid].start_us
    when = (t[hit[0]] - start) / 1e6 if hit.size else float("nan")
    return when, float(s.max()) if s.size else -8.0


def cmd_verify(args) -> int:
    from .lab.acceptance import CRITERIA, run_all
    numbers = [int(x) for x in args.only.split(",")] if args.only else sorted(CRITERIA)
    res = run_all(numbers, args.jobs or _env_jobs())
    failed = [r.number for r in res if not r.passed]
    print(f"{len(res) - len(failed)}/{len(res)} criteria passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecnfallback", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one scenario and write CSVs")
    _add_scenario_flags(r)
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or out/<label>)")
    r.set_defaults(fn=cmd_run)

    m = sub.add_parser("matrix", help="run a grid of scenarios")
    _add_scenario_flags(m)
    m.add_argument("--aqms", default="codel,dualpi2")
    m.add_argument("--rates", default="12,40,120", help="Mb/s, comma separated")
    m.add_argument("--rtts", default="10,20,50", help="ms, comma separated")
    m.add_argument("--patterns", default="", help="prague:cubic pairs, e.g. 1:1,1L:9")
    m.add_argument("--full", action="store_true", help="5 rates x 5 RTTs x 20 patterns")
    m.add_argument("--base-seed", type=int, default=1)
    m.add_argument("--jobs", type=int, default=0, help=f"workers (default ${JOBS_ENV} or 1)")
    m.add_argument("--out")
    m.set_defaults(fn=cmd_matrix)

    c = sub.add_parser("calibrate", help="sweep V0, D0 and gain offset")
    _add_scenario_flags(c)
    c.add_argument("--sweep-v0", default="500,750,1000", help="V0 values in us")
    c.add_argument("--sweep-d0", default="1000,2000,4000", help="D0 values in us")
    c.add_argument("--sweep-g-diff", default="1", help="mdev minus srtt gain shift")
    c.add_argument("--jobs", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(fn=cmd_calibrate)

    v = sub.add_parser("verify", help="run the acceptance checks")
    v.add_argument("--only", default="", help="comma separated criterion numbers")
    v.add_argument("--jobs", type=int, default=0)
    v.set_defaults(fn=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
