"""Traffic-light verdicts: detection outcome against the true AQM class.

GREEN means the flows ended in the right mode. RED means a Classic AQM was
present but a flow ended in scalable mode (a missed detection). AMBER means
the AQM was L4S but flows ended in Classic mode (a false alarm).
"""

import enum
from dataclasses import dataclass

CLASSIC_THRESHOLD = 1.0
SHORT_FLOW_FRACTION = 0.25


class Color(enum.IntEnum):
    GREEN = 0
    AMBER = 1
    RED = 2


@dataclass(frozen=True)
class Verdict:
    color: Color
    basis: str

    def __str__(self) -> str:
        return f"{self.color.name} ({self.basis})"


def detects_classic(score: float, threshold: float = CLASSIC_THRESHOLD) -> bool:
    return score >= threshold


def flow_verdict(classic_aqm: bool, ends_classic: bool) -> Color:
    if classic_aqm and not ends_classic:
        return Color.RED
    if not classic_aqm and ends_classic:
        return Color.AMBER
    return Color.GREEN


def cell_verdict(classic_aqm: bool, long_scores, short_scores=(),
                 threshold: float = CLASSIC_THRESHOLD,
                 short_fraction: float = SHORT_FLOW_FRACTION) -> Verdict:
    """Combine per-flow outcomes into one verdict for a scenario.

    Long flows are judged individually. Short flows only count over an L4S
    AQM (most finish before they could detect anything), and then only when
    more than short_fraction of the completed ones end in Classic mode.
    """
    long_scores = list(long_scores)
    short_scores = list(short_scores)
    aqm = "classic" if classic_aqm else "L4S"
    worst = Color.GREEN
    basis = f"{aqm} AQM, {len(long_scores)} long flows"
    for s in long_scores:
        c = flow_verdict(classic_aqm, detects_classic(s, threshold))
        if c > worst:
            worst = c
            basis = f"{aqm} AQM, long flow ended at {s:.2f}"
    if not classic_aqm and short_scores:
        hits = sum(detects_classic(s, threshold) for s in short_scores)
        frac = hits / len(short_scores)
        if frac > short_fraction and Color.AMBER > worst:
            worst = Color.AMBER
            basis = f"{aqm} AQM, {frac:.0%} of short flows ended Classic"
    return Verdict(worst, basis)


def bundle_verdict(bundle, threshold: float = CLASSIC_THRESHOLD) -> Verdict:
    classic = bool(bundle.summary["aqm_end_classic"])
    long_scores = bundle.final_scores("prague", long=True).values()
    short = [f.final_score for f in bundle.flows.values()
             if f.kind == "prague" and not f.long and f.end_us is not None
             and f.final_score is not None]
    return cell_verdict(classic, long_scores, short, threshold)
