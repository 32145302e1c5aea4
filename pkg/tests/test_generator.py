import pytest

from vrburst.generator import (
    BurstDescriptor,
    GeneratorExhaustedError,
    SimpleBurstGenerator,
    TraceFile,
    TraceFileBurstGenerator,
    TraceParseError,
    VrBurstGenerator,
    load_trace,
    save_trace,
)
from vrburst.model import VrStreamParams
from vrburst.rv import ConstantDist, RngStream


def write(tmp_path, text, name="trace.csv"):
    path = tmp_path / name
    path.write_bytes(text.encode())
    return path


class TestSimpleBurstGenerator:
    def test_constant_generator_repeats(self):
        gen = SimpleBurstGenerator(ConstantDist(10_000), ConstantDist(0.01), RngStream(1))
        for _ in range(5):
            assert gen.has_next_burst()
            assert gen.generate_burst() == BurstDescriptor(10_000, 10_000_000)

    def test_sizes_floor_at_one_byte(self):
        gen = SimpleBurstGenerator(ConstantDist(0.2), ConstantDist(0.01), RngStream(1))
        assert gen.generate_burst().burst_size == 1

    def test_negative_periods_clamp_to_zero(self):
        gen = SimpleBurstGenerator(ConstantDist(100), ConstantDist(-1.0), RngStream(1))
        assert gen.generate_burst().next_period_ns == 0


class TestVrBurstGenerator:
    def test_long_run_statistics(self):
        params = VrStreamParams(50e6, 60)
        gen = VrBurstGenerator(params, RngStream(7, 1))
        descs = [gen.generate_burst() for _ in range(20_000)]
        mean_size = sum(d.burst_size for d in descs) / len(descs)
        mean_period = sum(d.next_period_ns for d in descs) / len(descs)
        assert mean_size == pytest.approx(104_167, rel=0.01)
        assert mean_period == pytest.approx(16_666_667, rel=0.005)

    def test_never_exhausts(self):
        gen = VrBurstGenerator(VrStreamParams(10e6, 30), RngStream(8))
        assert all(gen.has_next_burst() or True for _ in range(3))
        assert gen.has_next_burst()

    def test_reproducible_for_fixed_stream(self):
        params = VrStreamParams(20e6, 30)
        a = VrBurstGenerator(params, RngStream(9, 4))
        b = VrBurstGenerator(params, RngStream(9, 4))
        assert [a.generate_burst() for _ in range(50)] == [b.generate_burst() for _ in range(50)]


class TestLoadTrace:
    def test_metadata_and_units(self, tmp_path):
        trace = load_trace(write(tmp_path, "# fps: 60\n1000,16667\n"))
        assert trace.metadata == {"fps": "60"}
        assert trace.records == [BurstDescriptor(1000, 16_667_000)]

    def test_crlf_endings(self, tmp_path):
        trace = load_trace(write(tmp_path, "# fps: 30\r\n500,1000\r\n600,2000\r\n"))
        assert [r.burst_size for r in trace.records] == [500, 600]

    def test_fractional_seconds_unit(self, tmp_path):
        trace = load_trace(write(tmp_path, "1000,0.016667\n"), period_unit="s")
        assert trace.records[0].next_period_ns == 16_667_000

    def test_non_integer_size_names_line(self, tmp_path):
        with pytest.raises(TraceParseError, match="line 1"):
            load_trace(write(tmp_path, "abc,5\n"))

    def test_error_line_numbers_count_header(self, tmp_path):
        with pytest.raises(TraceParseError, match="line 3"):
            load_trace(write(tmp_path, "# fps: 60\n10,10\nabc,5\n"))

    def test_negative_field_rejected(self, tmp_path):
        with pytest.raises(TraceParseError, match="unsigned"):
            load_trace(write(tmp_path, "-5,10\n"))

    def test_wrong_column_count_rejected(self, tmp_path):
        with pytest.raises(TraceParseError, match="line 1"):
            load_trace(write(tmp_path, "1,2,3\n"))

    def test_zero_period_rejected(self, tmp_path):
        with pytest.raises(TraceParseError, match="positive"):
            load_trace(write(tmp_path, "10,0\n"))

    def test_empty_data_rejected(self, tmp_path):
        with pytest.raises(TraceParseError, match="no data rows"):
            load_trace(write(tmp_path, "# fps: 60\n"))

    def test_row_count_scales_with_duration(self, tmp_path):
        # a 550 s trace at 60 FPS carries about 33k records
        rows = "\n".join("1000,16667" for _ in range(33_000))
        trace = load_trace(write(tmp_path, rows + "\n"))
        assert len(trace.records) == 33_000
        assert trace.duration_ns == pytest.approx(550e9, rel=0.01)


class TestSaveTrace:
    def test_round_trip(self, tmp_path):
        records = [BurstDescriptor(1000, 5_000_000), BurstDescriptor(2000, 7_000_000)]
        path = tmp_path / "out.csv"
        save_trace(path, records, {"fps": "60", "seed": "3"})
        back = load_trace(path)
        assert back.records == records
        assert back.metadata == {"fps": "60", "seed": "3"}

    def test_sub_microsecond_periods_floor_at_one(self, tmp_path):
        path = tmp_path / "out.csv"
        save_trace(path, [BurstDescriptor(10, 300)])
        assert load_trace(path).records[0].next_period_ns == 1000


class TestTraceReplay:
    def test_replays_rows_in_order(self, tmp_path):
        path = write(tmp_path, "1000,5000\n2000,7000\n")
        gen = TraceFileBurstGenerator(load_trace(path))
        assert gen.has_next_burst()
        assert gen.generate_burst() == BurstDescriptor(1000, 5_000_000)
        assert gen.has_next_burst()
        assert gen.generate_burst() == BurstDescriptor(2000, 7_000_000)
        assert not gen.has_next_burst()

    def test_accepts_path_directly(self, tmp_path):
        gen = TraceFileBurstGenerator(write(tmp_path, "1,1\n"))
        assert gen.generate_burst().burst_size == 1

    def test_generate_after_exhaustion_raises(self, tmp_path):
        gen = TraceFileBurstGenerator(write(tmp_path, "1,1\n"))
        gen.generate_burst()
        assert not gen.has_next_burst()
        with pytest.raises(GeneratorExhaustedError):
            gen.generate_burst()

    def test_full_replay_matches_file(self, tmp_path):
        rows = [(100 + i, 1000 + i) for i in range(50)]
        text = "\n".join(f"{s},{p}" for s, p in rows) + "\n"
        gen = TraceFileBurstGenerator(write(tmp_path, text))
        out = []
        while gen.has_next_burst():
            out.append(gen.generate_burst())
        assert [(d.burst_size, d.next_period_ns // 1000) for d in out] == rows


class TestSeekStartTime:
    def trace(self):
        # three bursts at t = 0, 5, 10 ms
        return TraceFile(records=[BurstDescriptor(i + 1, 5_000_000) for i in range(3)])

    def test_zero_skips_nothing(self):
        gen = TraceFileBurstGenerator(self.trace(), start_time_s=0.0)
        assert gen.generate_burst().burst_size == 1

    def test_mid_trace_start(self):
        # t0 = 7 ms: first burst at or after it is the third (t = 10 ms)
        gen = TraceFileBurstGenerator(self.trace(), start_time_s=0.007)
        assert gen.generate_burst().burst_size == 3
        assert not gen.has_next_burst()

    def test_seek_past_end_exhausts(self):
        gen = TraceFileBurstGenerator(self.trace(), start_time_s=1.0)
        assert not gen.has_next_burst()

    def test_disjoint_start_times_yield_disjoint_records(self):
        trace = TraceFile(records=[BurstDescriptor(i + 1, 10_000_000) for i in range(10)])
        early = TraceFileBurstGenerator(trace, start_time_s=0.0)
        late = TraceFileBurstGenerator(trace, start_time_s=0.05)

        def window(gen, budget_s):
            out, elapsed = [], 0
            while gen.has_next_burst() and elapsed < budget_s * 1e9:
                d = gen.generate_burst()
                out.append(d.burst_size)
                elapsed += d.next_period_ns
            return out

        first = window(early, 0.05)
        second = window(late, 0.05)
        assert first == [1, 2, 3, 4, 5]
        assert second == [6, 7, 8, 9, 10]
        assert not set(first) & set(second)
