"""Scenario matrices: build a grid of configs, run every cell, summarize.

Each cell gets its seed from its own label, so results do not depend on the
order cells are executed in or on how many run at once.
"""

import itertools
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..netsim import ScenarioConfig, parse_pattern, run
from .stats import Whiskers, class_whiskers, stabilization_time_s, whiskers
from .verdict import Color, bundle_verdict

DESK_RATES = (12.0, 40.0, 120.0)
DESK_RTTS = (10.0, 20.0, 50.0)
DESK_PATTERNS = (("1", "1"), ("1", "0"), ("1", "9"), ("1L", "1"))
FULL_RATES = (4.0, 12.0, 40.0, 120.0, 200.0)
FULL_RTTS = (5.0, 10.0, 20.0, 50.0, 100.0)
FULL_PRAGUE = ("1", "9", "L", "1L")
FULL_CUBIC = ("0", "1", "9", "L", "1L")


def cell_seed(base_seed: int, label: str) -> int:
    return zlib.crc32(f"{base_seed}:{label}".encode()) & 0x7FFFFFFF


def build_grid(aqms=("codel", "dualpi2"), rates=DESK_RATES, rtts=DESK_RTTS,
               patterns=DESK_PATTERNS, base: ScenarioConfig | None = None,
               base_seed: int = 1) -> list[ScenarioConfig]:
    base = base or ScenarioConfig()
    cells = []
    for aqm, rate, rtt, (p, c) in itertools.product(aqms, rates, rtts, patterns):
        cfg = base.with_(aqm=aqm, rate_mbps=rate, rtt_ms=rtt, prague=p, cubic=c)
        cells.append(cfg.with_(seed=cell_seed(base_seed, cfg.label())))
    return cells


def full_grid(aqms=("codel", "dualpi2"), base: ScenarioConfig | None = None,
              base_seed: int = 1) -> list[ScenarioConfig]:
    patterns = tuple(itertools.product(FULL_PRAGUE, FULL_CUBIC))
    return build_grid(aqms, FULL_RATES, FULL_RTTS, patterns, base, base_seed)


@dataclass
class CellResult:
    label: str
    config: ScenarioConfig
    color: Color | None = None
    basis: str = ""
    prague: Whiskers = field(default_factory=lambda: whiskers([]))
    cubic: Whiskers = field(default_factory=lambda: whiskers([]))
    utilization: float = float("nan")
    final_scores: dict = field(default_factory=dict)
    elapsed_s: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_cell(cfg: ScenarioConfig) -> CellResult:
    """Run one cell; failures are captured in the result, not raised."""
    res = CellResult(cfg.label(), cfg)
    t = time.perf_counter()
    try:
        b = run(cfg)
        v = bundle_verdict(b)
        res.color, res.basis = v.color, v.basis
        n_long = parse_pattern(cfg.prague)[0] + parse_pattern(cfg.cubic)[0]
        t0 = int(stabilization_time_s(cfg.rate_bps, cfg.rtt_ms / 1000) * 1e6)
        if n_long and t0 < b.duration_us:
            res.prague = class_whiskers(b, "prague", n_long, t0)
            res.cubic = class_whiskers(b, cfg.competitor, n_long, t0)
        res.utilization = b.utilization
        res.final_scores = b.final_scores("prague", long=True)
    except Exception as exc:  # noqa: BLE001 - one bad cell must not stop the matrix
        res.error = f"{type(exc).__name__}: {exc}"
    res.elapsed_s = time.perf_counter() - t
    return res


def pmap(fn, items, parallelism: int = 1) -> list:
    """map() over worker processes; results keep the order of `items`."""
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def run_matrix(cells, parallelism: int = 1) -> list[CellResult]:
    """Run every cell; results come back in the order of `cells`."""
    return pmap(run_cell, cells, parallelism)


def tally(results) -> dict[str, int]:
    counts = {c.name: 0 for c in Color}
    counts["ERROR"] = 0
    for r in results:
        counts["ERROR" if not r.ok else r.color.name] += 1
    return counts
