"""Scenario configuration and the top-level run() entry point."""

import configparser
import random
import re
from dataclasses import dataclass, field, fields, replace

from ..aqm import AQM_KINDS, make_aqm
from ..fallback_detect import ScoreParams
from .engine import EventLoop
from .metrics import Accounting, Recorder
from .network import Bottleneck, Flow, FlowConfig
from .traffic import WebArrivals

PATTERN_RE = re.compile(r"^(\d*)(L?)$")


class ConfigError(ValueError):
    pass


def parse_pattern(p: str) -> tuple[int, bool]:
    """'0', '1', '9', 'L', '1L' -> (long flows, web traffic)."""
    m = PATTERN_RE.match(str(p).strip().upper())
    if not m or (not m.group(1) and not m.group(2)):
        raise ConfigError(f"bad traffic pattern {p!r}")
    n = int(m.group(1)) if m.group(1) else 0
    return n, bool(m.group(2))


@dataclass
class ScenarioConfig:
    rate_mbps: float = 40.0
    rtt_ms: float = 10.0
    aqm: str = "codel"
    prague: str = "1"
    cubic: str = "1"
    duration_s: float = 20.0
    seed: int = 1
    fallback: bool = True
    probe: bool = False
    passive: bool = True
    reroute_filter: bool = True
    alt: int = 2
    competitor: str = "cubic"
    prague_start_s: float = 0.0
    cubic_start_s: float = 0.0
    aqm_switch_s: float | None = None
    aqm_switch_to: str | None = None
    reroute_s: float | None = None
    reroute_ms: float = 0.0
    g_diff: int = 1
    v0_us: int = 750
    d0_us: int = 2000
    combined_log: bool = False
    pacing_ca: float = 1.0
    trace_acks: bool = True
    check_conservation: bool = True
    start_jitter_ms: float = 50.0
    aqm_params: dict = field(default_factory=dict)

    def validate(self) -> "ScenarioConfig":
        n_p, web_p = parse_pattern(self.prague)
        n_c, web_c = parse_pattern(self.cubic)
        if n_p == 0 and not web_p:
            raise ConfigError("the scalable traffic pattern must not be 0")
        if self.rate_mbps <= 0 or self.rtt_ms <= 0 or self.duration_s <= 0:
            raise ConfigError("rate, RTT and duration must be positive")
        if self.aqm.lower() not in AQM_KINDS:
            raise ConfigError(f"unknown AQM {self.aqm!r}")
        if self.aqm_switch_to is not None and self.aqm_switch_to.lower() not in AQM_KINDS:
            raise ConfigError(f"unknown AQM {self.aqm_switch_to!r}")
        if self.competitor not in ("cubic", "reno"):
            raise ConfigError(f"unknown competitor {self.competitor!r}")
        if self.alt not in (1, 2):
            raise ConfigError("alt must be 1 or 2")
        return self

    @property
    def rate_bps(self) -> float:
        return self.rate_mbps * 1e6

    @property
    def rtt_us(self) -> int:
        return int(round(self.rtt_ms * 1000))

    def score_params(self) -> ScoreParams:
        return ScoreParams(v0_us=self.v0_us, d0_us=self.d0_us, combined_log=self.combined_log)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)

    def label(self) -> str:
        return f"{self.aqm}_{self.rate_mbps:g}M_{self.rtt_ms:g}ms_{self.prague}-{self.cubic}"


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def coerce_field(name: str, raw: str):
    """Convert a text value to the type of the named ScenarioConfig field."""
    types = {f.name: f.type for f in fields(ScenarioConfig)}
    if name not in types:
        raise ConfigError(f"unknown scenario key {name!r}")
    t = str(types[name])
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in t:
        return None
    if "bool" in t:
        try:
            return _BOOL[raw.lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}") from None
    if "float" in t:
        return float(raw)
    if "int" in t:
        return int(raw)
    if "dict" in t:
        out = {}
        for part in filter(None, raw.split(",")):
            k, _, v = part.partition("=")
            out[k.strip()] = float(v) if "." in v else int(v)
        return out
    return raw


def load_config(path: str) -> ScenarioConfig:
    """Read a [scenario] section of key = value lines."""
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read scenario file {path}")
    if "scenario" not in cp:
        raise ConfigError(f"{path}: missing [scenario] section")
    kw = {k: coerce_field(k, v) for k, v in cp["scenario"].items()}
    return ScenarioConfig(**kw).validate()


class Simulation:
    """One dumbbell run. Build it, then call run()."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg.validate()
        self.loop = EventLoop()
        self.rec = Recorder(trace_acks=cfg.trace_acks)
        self.acct = Accounting()
        self.aqm = make_aqm(cfg.aqm, cfg.rate_bps, seed=cfg.seed, **cfg.aqm_params)
        self.link = Bottleneck(self.loop, cfg.rate_bps, self.aqm, self.rec, self.acct,
                               cfg.check_conservation)
        self.rng = random.Random(cfg.seed * 7919 + 17)
        self.flows = []
        self.next_fid = 0
        sp = cfg.score_params()
        self.prague_cfg = FlowConfig("prague", fallback=cfg.fallback, alt=cfg.alt, probe=cfg.probe,
                                     reroute_filter=cfg.reroute_filter, g_diff=cfg.g_diff,
                                     pacing_ca=cfg.pacing_ca, score_params=sp, passive=cfg.passive)
        self.comp_cfg = FlowConfig(cfg.competitor)
        self.fwd = cfg.rtt_us // 2
        self.rev = cfg.rtt_us - self.fwd
        self._marks = 0
        self._deq = 0
        self.end_us = int(cfg.duration_s * 1e6)
        self._ready = False

    def add_flow(self, fcfg: FlowConfig, start_us: int, size: int | None, long: bool) -> Flow:
        fid = self.next_fid
        self.next_fid += 1
        f = Flow(fid, fcfg, self.loop, self.link, self.rec, self.acct, self.fwd, self.rev,
                 size, long)
        self.flows.append(f)
        self.loop.at(start_us, f.start)
        return f

    def _jitter(self) -> int:
        return int(self.rng.random() * self.cfg.start_jitter_ms * 1000)

    def _web(self, fcfg: FlowConfig, arrivals: WebArrivals) -> None:
        now = self.loop.now
        self.add_flow(fcfg, now, arrivals.next_size(), False)
        t = now + arrivals.next_gap_us()
        if t < self.end_us:
            self.loop.at(t, self._web, fcfg, arrivals)

    def _sample_prob(self, period: int) -> None:
        st = self.link.aqm.stats
        deq = st.dequeued - self._deq
        marks = st.marks + st.drops - self._marks
        self._deq = st.dequeued
        self._marks = st.marks + st.drops
        now = self.loop.now
        self.rec.prob_rows.append((now, marks / deq if deq else 0.0, self.link.aqm.probability()))
        if now + period <= self.end_us:
            self.loop.at(now + period, self._sample_prob, period)

    def _switch(self, kind: str) -> None:
        now = self.loop.now
        new = make_aqm(kind, self.cfg.rate_bps, seed=self.cfg.seed + 1, **self.cfg.aqm_params)
        if hasattr(new, "pi"):
            new.pi.next_update = now + new.pi.tupdate
        self._deq = 0
        self._marks = 0
        self.link.switch_aqm(new)
        self.rec.event_rows.append((now, "aqm_switch", kind))

    def _reroute(self, delta_us: int) -> None:
        self.rev = max(self.rev + delta_us, 0)
        for f in self.flows:
            f.rev_delay = max(f.rev_delay + delta_us, 0)
        self.rec.event_rows.append((self.loop.now, "reroute", delta_us))

    def setup(self) -> None:
        """Schedule flows and mid-run events; runs once, before any scripted hooks."""
        if self._ready:
            return
        self._ready = True
        cfg = self.cfg
        n_p, web_p = parse_pattern(cfg.prague)
        n_c, web_c = parse_pattern(cfg.cubic)
        p0 = int(cfg.prague_start_s * 1e6)
        c0 = int(cfg.cubic_start_s * 1e6)
        for _ in range(n_p):
            self.add_flow(self.prague_cfg, p0 + self._jitter(), None, True)
        for _ in range(n_c):
            self.add_flow(self.comp_cfg, c0 + self._jitter(), None, True)
        if web_p:
            short_p = FlowConfig("prague", fallback=cfg.fallback, alt=cfg.alt, probe=cfg.probe,
                                 reroute_filter=cfg.reroute_filter, g_diff=cfg.g_diff,
                                 pacing_ca=cfg.pacing_ca, score_params=cfg.score_params(), trace=False,
                                 passive=cfg.passive)
            arr = WebArrivals(cfg.rate_bps, cfg.seed * 31 + 1)
            self.loop.at(p0 + arr.next_gap_us(), self._web, short_p, arr)
        if web_c:
            arr = WebArrivals(cfg.rate_bps, cfg.seed * 31 + 2)
            self.loop.at(c0 + arr.next_gap_us(), self._web, FlowConfig(cfg.competitor), arr)
        if cfg.aqm_switch_s is not None and cfg.aqm_switch_to:
            self.loop.at(int(cfg.aqm_switch_s * 1e6), self._switch, cfg.aqm_switch_to)
        if cfg.reroute_s is not None and cfg.reroute_ms:
            self.loop.at(int(cfg.reroute_s * 1e6), self._reroute, int(cfg.reroute_ms * 1000))
        period = 16 * cfg.rtt_us
        self.loop.at(period, self._sample_prob, period)

    def run(self):
        from .bundle import MetricsBundle
        self.setup()
        self.loop.run(self.end_us)
        for f in self.flows:
            if not f.done:
                f.final_snapshot()
        return MetricsBundle.from_simulation(self)


def run(cfg: ScenarioConfig):
    """Run one scenario to completion and return its MetricsBundle."""
    return Simulation(cfg).run()
