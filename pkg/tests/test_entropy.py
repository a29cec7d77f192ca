import math

import numpy as np
import pytest

from idskit.entropy import (
    CHARACTERISTICS,
    NORMAL,
    SUSPICIOUS,
    EntropyWindow,
    entropy,
    make_windows,
    screen_interval,
)
from idskit.flow import PacketRecord, partition


class TestEntropy:
    def test_degenerate_distribution_is_zero(self):
        assert entropy({"a": 17}) == 0.0

    def test_uniform_four_values_is_two_bits(self):
        assert entropy({"a": 3, "b": 3, "c": 3, "d": 3}) == pytest.approx(2.0)

    def test_quarter_three_quarter_split(self):
        # oracle: -(1/4 log2 1/4 + 3/4 log2 3/4) evaluated directly
        expected = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
        assert expected == pytest.approx(0.811278, abs=1e-6)
        assert entropy({"a": 1, "b": 3}) == pytest.approx(expected)

    def test_empty_distribution_is_error(self):
        with pytest.raises(ValueError):
            entropy({})

    def test_bounds_and_uniform_maximum(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            k = int(rng.integers(1, 12))
            counts = {i: int(rng.integers(1, 50)) for i in range(k)}
            h = entropy(counts)
            assert 0.0 <= h <= math.log2(k) + 1e-12
        assert entropy({i: 7 for i in range(8)}) == pytest.approx(3.0)

    def test_permutation_and_scaling_invariance(self):
        counts = {"a": 2, "b": 5, "c": 1}
        permuted = {"c": 1, "a": 2, "b": 5}
        scaled = {k: 13 * v for k, v in counts.items()}
        assert entropy(permuted) == pytest.approx(entropy(counts))
        assert entropy(scaled) == pytest.approx(entropy(counts))


class TestWindow:
    def test_on_band_value_is_normal(self):
        w = EntropyWindow("src_addr")
        for h in [2, 2, 2]:
            w.push_and_flag(h)
        assert w.push_and_flag(2.0) == NORMAL

    def test_any_deviation_with_zero_std_flags(self):
        w = EntropyWindow("src_addr")
        for h in [2, 2, 2]:
            w.push_and_flag(h)
        assert w.push_and_flag(2.1) == SUSPICIOUS

    def test_band_edge_oracle(self):
        # history [1, 2, 3]: E = 2, S = sqrt(2/3); 2.9 > 2.8165 flags
        w = EntropyWindow("src_addr")
        for h in [1, 2, 3]:
            w.push_and_flag(h)
        assert w.mean == pytest.approx(2.0)
        assert w.std == pytest.approx(math.sqrt(2.0 / 3.0))
        assert w.std == pytest.approx(0.8165, abs=1e-4)
        assert w.push_and_flag(2.9) == SUSPICIOUS

    def test_warmup_never_flags(self):
        w = EntropyWindow("src_addr", warmup=3)
        assert w.push_and_flag(5.0) == NORMAL
        assert w.push_and_flag(0.0) == NORMAL
        assert w.push_and_flag(9.0) == NORMAL
        assert len(w.history) == 3

    def test_verdict_uses_band_before_push(self):
        w = EntropyWindow("src_addr")
        for h in [1.0, 1.0, 1.0]:
            w.push_and_flag(h)
        # 4.0 flags against [1,1,1] even though it then joins the history
        assert w.push_and_flag(4.0) == SUSPICIOUS
        assert list(w.history) == [1.0, 1.0, 1.0, 4.0]

    def test_ring_drops_old_entries(self):
        w = EntropyWindow("src_addr", window=4)
        for h in [1, 2, 3, 4, 5]:
            w.push_and_flag(h)
        assert list(w.history) == [2, 3, 4, 5]

    def test_stats_match_fresh_recomputation(self):
        rng = np.random.default_rng(1)
        w = EntropyWindow("src_addr", window=6)
        for h in rng.uniform(0, 4, 30):
            w.push_and_flag(float(h))
            hist = np.array(w.history)
            assert w.mean == pytest.approx(hist.mean())
            assert w.std == pytest.approx(hist.std())  # population std


def interval_flows(spec, interval_index=0):
    """spec: list of (src, sport, dst, dport, npackets)."""
    packets = []
    t0 = interval_index * 5.0
    for src, sport, dst, dport, n in spec:
        for i in range(n):
            packets.append(
                PacketRecord(t0 + 0.01 * len(packets), src, dst, sport, dport, "tcp", 60)
            )
    flows = partition(packets, 5.0)
    assert all(f.interval_index == interval_index for f in flows)
    return flows


class TestScreenInterval:
    def test_identical_intervals_stay_normal(self):
        windows = make_windows(warmup=3)
        spec = [(f"10.0.0.{i}", 1000 + i, f"10.1.0.{i}", 80 + i, 2) for i in range(8)]
        for idx in range(6):
            result = screen_interval(interval_flows(spec, idx), windows, idx)
            assert result.verdict == NORMAL
            assert all(v == NORMAL for v in result.per_characteristic.values())

    def test_dst_entropy_collapse_flags(self):
        windows = make_windows(warmup=3)
        diverse = [(f"10.0.0.{i}", 1000 + i, f"10.1.0.{i}", 80 + i, 2) for i in range(8)]
        for idx in range(4):
            assert screen_interval(interval_flows(diverse, idx), windows, idx).verdict == NORMAL
        # every packet now hits one destination: dst_addr entropy drops to 0
        burst = [(f"10.0.0.{i}", 1000 + i, "10.1.0.1", 80, 4) for i in range(8)]
        result = screen_interval(interval_flows(burst, 4), windows, 4)
        assert result.per_characteristic["dst_addr"] == SUSPICIOUS
        assert result.entropies["dst_addr"] == 0.0
        assert result.verdict == SUSPICIOUS

    def test_first_interval_is_normal(self):
        windows = make_windows()
        spec = [("10.0.0.1", 1000, "10.1.0.9", 80, 3)]
        assert screen_interval(interval_flows(spec), windows, 0).verdict == NORMAL

    def test_empty_interval_records_zeros_and_skips_windows(self):
        windows = make_windows()
        result = screen_interval([], windows, 3)
        assert result.verdict == NORMAL
        assert all(h == 0.0 for h in result.entropies.values())
        assert all(len(w.history) == 0 for w in windows.values())

    def test_distributions_weighted_by_packet_count(self):
        windows = make_windows(warmup=1)
        # one flow with many packets dominates: entropy near zero despite two flows
        spec = [("10.0.0.1", 1000, "10.1.0.1", 80, 99), ("10.0.0.2", 2000, "10.1.0.2", 81, 1)]
        result = screen_interval(interval_flows(spec), windows, 0)
        expected = entropy({"a": 99, "b": 1})
        assert result.entropies["src_addr"] == pytest.approx(expected)

    def test_report_line_layout(self):
        windows = make_windows()
        result = screen_interval(interval_flows([("a", 1, "b", 2, 1)]), windows, 7)
        parts = result.report_line().split(",")
        assert parts[0] == "7"
        assert len(parts) == 2 + len(CHARACTERISTICS)
        assert parts[-1] in (NORMAL, SUSPICIOUS)
