"""CSV emission. Every series file starts with time_us, flow_id."""

import csv
import os
from pathlib import Path

import numpy as np

SERIES = {
    "score": ("time_us", "flow_id", "score", "fbk_mdev_us", "fbk_depth_us", "self_limited", "c",
              "cwnd", "alpha"),
    "rtt": ("time_us", "flow_id", "acc_mrtt_us", "fbk_srtt_us", "srtt_us", "fbk_mdev_us",
            "rtt_min_us"),
    "cwnd": ("time_us", "flow_id", "cwnd", "ssthresh", "cause"),
    "throughput": ("time_us", "flow_id", "rate_bps"),
    "queue": ("time_us", "flow_id", "ecn", "sojourn_us", "marked"),
    "prob": ("time_us", "flow_id", "mark_rate", "probability"),
    "probe": ("time_us", "flow_id", "event", "score", "ect_tracers"),
    "events": ("time_us", "flow_id", "event", "value"),
}
FLOW_COLUMNS = ("flow_id", "kind", "long", "start_us", "end_us", "size_bytes", "acked_bytes",
                "final_score", "triplets", "verdicts", "dup_bytes", "retransmits", "timeouts")
MATRIX_COLUMNS = ("label", "aqm", "rate_mbps", "rtt_ms", "prague", "cubic", "seed", "verdict",
                  "basis", "prague_p1", "prague_mean", "prague_p99", "cubic_p1", "cubic_mean",
                  "cubic_p99", "utilization", "error")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if v is None:
        return ""
    return v


def write_rows(path: Path, header, rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _series_rows(bundle, name):
    from ..fallback_detect import ONE
    if name == "score":
        return ((t, f, s / ONE, v, d, sl, c, cw, a) for t, f, s, v, d, sl, c, cw, a in bundle.score_rows)
    if name == "rtt":
        return bundle.ack_rows
    if name == "cwnd":
        return bundle.cwnd_rows
    if name == "throughput":
        return _throughput_rows(bundle)
    if name == "queue":
        return zip(bundle.pkt_t.tolist(), bundle.pkt_fid.tolist(), bundle.pkt_ecn.tolist(),
                   bundle.pkt_sojourn.tolist(), bundle.pkt_marked.astype(int).tolist())
    if name == "prob":
        return ((t, -1, m, p) for t, m, p in bundle.prob_rows)
    if name == "probe":
        return ((t, f, e, s / ONE, n) for t, f, e, s, n in bundle.probe_rows)
    if name == "events":
        return ((t, -1, e, v) for t, e, v in bundle.event_rows)
    raise KeyError(name)


def _throughput_rows(bundle):
    for fid in sorted(bundle.flows):
        t, r = bundle.rolling_throughput(fid)
        yield from zip(t.tolist(), [fid] * len(t), r.tolist())


def write_bundle(bundle, out_dir, series=None) -> list[Path]:
    """Write one CSV per series plus flows.csv and summary.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in series or SERIES:
        paths.append(write_rows(out / f"{name}.csv", SERIES[name], _series_rows(bundle, name)))
    flows = ([f.fid, f.kind, f.long, f.start_us, f.end_us, f.size_bytes, f.acked_bytes,
              f.final_score, f.triplets, f.verdicts, f.dup_bytes, f.retransmits, f.timeouts]
             for f in (bundle.flows[k] for k in sorted(bundle.flows)))
    paths.append(write_rows(out / "flows.csv", FLOW_COLUMNS, flows))
    paths.append(write_rows(out / "summary.csv", ("key", "value"), sorted(bundle.summary.items())))
    return paths


def write_matrix(results, path) -> Path:
    rows = []
    for r in results:
        c = r.config
        rows.append([r.label, c.aqm, c.rate_mbps, c.rtt_ms, c.prague, c.cubic, c.seed,
                     r.color.name if r.color is not None else "", r.basis,
                     r.prague.p1, r.prague.mean, r.prague.p99,
                     r.cubic.p1, r.cubic.mean, r.cubic.p99, r.utilization, r.error])
    p = Path(path)
    if p.parent and not p.parent.exists():
        os.makedirs(p.parent, exist_ok=True)
    return write_rows(p, MATRIX_COLUMNS, rows)
