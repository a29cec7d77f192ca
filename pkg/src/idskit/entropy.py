"""Shannon-entropy screening of collection intervals.

Each interval yields one entropy value per packet characteristic (source
address, source port, destination address, destination port). An interval is
suspicious when any characteristic's entropy leaves the band [E - S, E + S]
built from the recent history of that characteristic.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

NORMAL = "normal"
SUSPICIOUS = "suspicious"

CHARACTERISTICS = ("src_addr", "src_port", "dst_addr", "dst_port")

DEFAULT_WINDOW = 20
WARMUP_INTERVALS = 3


def entropy(counts: dict | Counter) -> float:
    """Shannon entropy in bits of a value->count distribution."""
    total = sum(counts.values())
    if total < 1:
        raise ValueError("empty distribution")
    h = 0.0
    for c in counts.values():
        if c < 0:
            raise ValueError("negative count")
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


@dataclass
class EntropyWindow:
    """Ring of the last ``window`` interval entropies for one characteristic.

    Mean E and population standard deviation S are recomputed from the ring
    after every push. Single-writer; one window per characteristic.
    """

    characteristic: str
    window: int = DEFAULT_WINDOW
    warmup: int = WARMUP_INTERVALS
    history: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        self.history = deque(self.history, maxlen=self.window)

    @property
    def mean(self) -> float:
        if not self.history:
            raise ValueError("empty history")
        return sum(self.history) / len(self.history)

    @property
    def std(self) -> float:
        m = self.mean
        return math.sqrt(sum((h - m) ** 2 for h in self.history) / len(self.history))

    def push_and_flag(self, h: float) -> str:
        """Verdict for h against the band from history *before* h joins it.

        Band endpoints are inclusive: values exactly at E - S or E + S are
        normal. The first ``warmup`` intervals only feed history.
        """
        if len(self.history) < self.warmup:
            verdict = NORMAL
        else:
            e, s = self.mean, self.std
            verdict = SUSPICIOUS if (h < e - s or h > e + s) else NORMAL
        self.history.append(h)
        return verdict


def make_windows(window: int = DEFAULT_WINDOW, warmup: int = WARMUP_INTERVALS) -> dict[str, EntropyWindow]:
    return {c: EntropyWindow(c, window=window, warmup=warmup) for c in CHARACTERISTICS}


@dataclass(frozen=True)
class IntervalScreenResult:
    interval_index: int
    entropies: dict[str, float]
    per_characteristic: dict[str, str]
    verdict: str

    def report_line(self) -> str:
        hs = ",".join(repr(self.entropies[c]) for c in CHARACTERISTICS)
        return f"{self.interval_index},{hs},{self.verdict}"


REPORT_HEADER = "interval_index,h_srcaddr,h_srcport,h_dstaddr,h_dstport,verdict"


def screen_interval(flows, windows: dict[str, EntropyWindow], interval_index: int = 0) -> IntervalScreenResult:
    """Screen one interval's flows; suspicious if any characteristic flags.

    Distributions weight each flow by its packet count, so they approximate
    the interval's packet-level distributions. An empty interval is normal,
    records zero entropies, and leaves the windows untouched.
    """
    if not flows:
        return IntervalScreenResult(
            interval_index=interval_index,
            entropies={c: 0.0 for c in CHARACTERISTICS},
            per_characteristic={c: NORMAL for c in CHARACTERISTICS},
            verdict=NORMAL,
        )
    dists: dict[str, Counter] = {c: Counter() for c in CHARACTERISTICS}
    for flow in flows:
        w = flow.packet_count
        dists["src_addr"][flow.id.src_ip] += w
        dists["src_port"][flow.id.src_port] += w
        dists["dst_addr"][flow.id.dst_ip] += w
        dists["dst_port"][flow.id.dst_port] += w
    entropies = {c: entropy(dists[c]) for c in CHARACTERISTICS}
    per_char = {c: windows[c].push_and_flag(entropies[c]) for c in CHARACTERISTICS}
    verdict = SUSPICIOUS if SUSPICIOUS in per_char.values() else NORMAL
    return IntervalScreenResult(
        interval_index=interval_index,
        entropies=entropies,
        per_characteristic=per_char,
        verdict=verdict,
    )
