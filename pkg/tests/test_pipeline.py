import json
import math

import numpy as np
import pytest

from conftest import band_noise, tone
from oracles import gate_oracle
from wakegate.backbone import init_native_embedder
from wakegate.errors import UnknownClient
from wakegate.pipeline import (DetectionEvent, Engine, PipelineConfig, emit_event_log, iter_blocks,
                               read_event_log)
from wakegate.speaker_auth import AuthConfig, enroll, init_native_encoder
from wakegate.wakeword import init_fcn


@pytest.fixture(scope="module")
def embedder():
    return init_native_embedder(42)


@pytest.fixture(scope="module")
def encoder():
    return init_native_encoder(7)


def constant(p):
    return lambda window: p


def hashed(window):
    """Deterministic pseudo-random probability derived from the window contents."""
    return 0.5 + 0.5 * math.sin(float(np.sum(window)) * 1e3)


def classification_time(k, cfg=PipelineConfig()):
    """Audio sample at which the k-th classification (1-based) becomes possible."""
    frames = cfg.emb_features + (cfg.ww_windows - 1 + k - 1) * cfg.emb_step
    return math.ceil(frames / 9) * 1760


def stream(seconds, seed):
    g = np.random.default_rng(seed)
    n = int(seconds * 16000)
    x = 0.05 * g.standard_normal(n)
    for start in g.integers(0, n - 16000, size=max(1, int(seconds // 5))):
        x[start : start + 16000] += tone(float(g.uniform(300, 2000)), 1.0, amp=0.3)
    return np.clip(x, -1, 1)


class TestConfig:
    def test_frames_per_chunk(self):
        assert PipelineConfig().frames_per_chunk == 9

    def test_classification_arithmetic(self):
        cfg = PipelineConfig()
        assert cfg.frames_for_classification(4) == 220
        assert cfg.samples_for_classification(4) == 44000

    @pytest.mark.parametrize("kw", [dict(emb_step=0), dict(emb_step=80), dict(wake_threshold=1.5),
                                    dict(audio_capacity=4000), dict(cooldown_frames=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)


class TestStep:
    def test_unknown_client(self, embedder):
        with pytest.raises(UnknownClient):
            Engine(PipelineConfig(), embedder, constant(0.9)).step("x", np.zeros(10))

    def test_under_one_chunk(self, embedder):
        eng = Engine(PipelineConfig(), embedder, constant(0.99))
        eng.register_client("c")
        assert eng.step("c", np.zeros(1759)) == []
        assert eng.client("c").mel_ring.total == 0

    def test_silence_threshold_one(self, embedder):
        eng = Engine(PipelineConfig(wake_threshold=1.0), embedder, init_fcn(seed=0))
        eng.register_client("c")
        assert eng.step("c", np.zeros(16000)) == []

    def test_rigged_scorer_timing(self, embedder):
        eng = Engine(PipelineConfig(), embedder, constant(0.99))
        eng.register_client("c")
        events = eng.step("c", np.zeros(16000 * 6))
        assert events[0].audio_time == 25 * 1760 == 44000 == classification_time(4)
        # the next trigger needs four fresh classifications after the 20 skipped ones
        assert events[1].audio_time == classification_time(4 + 20 + 4) == 80960
        assert all(e.probability == 0.99 for e in events)

    def test_block_size_irrelevant(self, embedder):
        audio = stream(8, seed=3)
        runs = []
        for block in (1, 997, 1760, 5000, audio.size):
            eng = Engine(PipelineConfig(), embedder, hashed)
            eng.register_client("c")
            out = []
            for piece in iter_blocks(audio, block) if block > 1 else [audio[:1000], audio[1000:]]:
                out.extend(eng.step("c", piece))
            runs.append(out)
        assert all(r == runs[0] for r in runs)

    def test_conservation(self, embedder):
        eng = Engine(PipelineConfig(), embedder, hashed)
        eng.register_client("c")
        eng.step("c", np.zeros(12345))
        st = eng.client("c")
        assert st.chunks_taken == 12345 // 1760
        assert st.mel_ring.total == 9 * st.chunks_taken
        assert st.pending_audio.size == 12345 % 1760

    def test_gate_trace_matches_events(self, embedder):
        seen = []

        def recording(window):
            p = hashed(window)
            seen.append(p)
            return p

        eng = Engine(PipelineConfig(trigger_level=2, wake_threshold=0.6), embedder, recording)
        eng.register_client("c")
        events = eng.step("c", stream(20, seed=1))
        actions = gate_oracle(seen, 0.6, 2)
        fired = [i + 1 for i, a in enumerate(actions) if a == "Triggered"]
        assert len(fired) > 1
        assert [e.audio_time for e in events] == [classification_time(k) for k in fired]
        assert [e.probability for e in events] == [seen[k - 1] for k in fired]
        # nothing fires inside a cooldown window
        for a, b in zip(fired, fired[1:]):
            assert b - a > 20

    def test_no_profile_reason(self, embedder):
        eng = Engine(PipelineConfig(), embedder, constant(0.99))
        eng.register_client("c")
        ev = eng.step("c", np.zeros(44000))[0]
        assert not ev.auth_success and ev.similarity is None and ev.reason == "no reference profile loaded"

    def test_auth_uses_audio_before_trigger(self, embedder, encoder):
        audio = band_noise(1000, 500, 48000, seed=9)
        prof = enroll([audio[44000 - 4000 : 44000]], encoder)
        eng = Engine(PipelineConfig(), embedder, constant(0.99), prof, encoder)
        eng.register_client("c")
        ev = eng.step("c", audio)[0]
        assert ev.audio_time == 44000
        assert ev.auth_success and ev.similarity == pytest.approx(1.0, abs=1e-9)

    def test_approach_a(self, embedder, encoder):
        audio = band_noise(1000, 500, 48000, seed=9)
        prof = enroll([audio[44000 - 27136 : 44000]], encoder, AuthConfig(approach="A"))
        cfg = PipelineConfig(auth=AuthConfig(approach="A"))
        eng = Engine(cfg, embedder, constant(0.99), prof, encoder)
        eng.register_client("c")
        ev = eng.step("c", audio)[0]
        assert ev.approach == "A" and ev.similarity == pytest.approx(1.0, abs=1e-9) and ev.auth_success

    def test_client_isolation(self, embedder):
        audio = stream(15, seed=4)
        eng = Engine(PipelineConfig(), embedder, hashed)
        eng.register_client("x")
        alone = eng.step("x", audio)

        eng = Engine(PipelineConfig(), embedder, hashed)
        eng.register_client("x")
        eng.register_client("y")
        mixed = []
        noise = np.clip(np.random.default_rng(0).normal(0, 2, audio.size), -1, 1)
        for a, b in zip(iter_blocks(audio, 1600), iter_blocks(noise, 1600)):
            eng.step("y", b)
            mixed.extend(eng.step("x", a))
        assert mixed == alone


class TestRunStream:
    def step_events(self, engine_factory, sources):
        eng = engine_factory()
        out = {}
        for cid, audio in sources.items():
            eng.register_client(cid)
            out[cid] = [e for b in iter_blocks(audio, 1600) for e in eng.step(cid, b)]
        return out

    def threaded_events(self, engine_factory, sources):
        eng = engine_factory()
        got = {cid: [] for cid in sources}
        eng.run_stream(sources, lambda e: got[e.client_id].append(e))
        return got

    def test_matches_step_mode(self, embedder, encoder):
        audio = {f"c{i}": stream(20, seed=10 + i) for i in range(3)}
        prof = enroll([audio["c0"][:8000]], encoder)

        def factory():
            return Engine(PipelineConfig(trigger_level=2), embedder, hashed, prof, encoder)

        ref = self.step_events(factory, audio)
        assert sum(map(len, ref.values())) > 0
        assert self.threaded_events(factory, audio) == ref

    def test_identical_clients(self, embedder):
        a = stream(10, seed=2)
        got = self.threaded_events(lambda: Engine(PipelineConfig(), embedder, hashed), {"p": a, "q": a.copy()})
        assert [(e.audio_time, e.probability) for e in got["p"]] == [(e.audio_time, e.probability) for e in got["q"]]

    def test_empty_source(self, embedder):
        got = self.threaded_events(lambda: Engine(PipelineConfig(), embedder, hashed), {"e": np.zeros(0)})
        assert got == {"e": []}

    def test_source_error(self, embedder):
        def bad():
            yield np.zeros(1600)
            raise RuntimeError("mic unplugged")

        eng = Engine(PipelineConfig(), embedder, hashed)
        with pytest.raises(RuntimeError, match="mic unplugged"):
            eng.run_stream({"c": bad()}, lambda e: None)

    def test_sink_error(self, embedder):
        def sink(ev):
            raise OSError("disk full")

        eng = Engine(PipelineConfig(), embedder, constant(0.99))
        with pytest.raises(OSError, match="disk full"):
            eng.run_stream({"c": np.zeros(60000)}, sink)


class TestEventLog:
    def test_empty(self, tmp_path):
        emit_event_log([], tmp_path / "e.jsonl")
        assert (tmp_path / "e.jsonl").read_text() == ""

    def test_schema(self, tmp_path):
        ev = DetectionEvent("c", 44000, 0.99, 0.97, True, "B")
        emit_event_log([ev], tmp_path / "e.jsonl")
        line = (tmp_path / "e.jsonl").read_text().splitlines()
        assert len(line) == 1
        rec = json.loads(line[0])
        assert list(rec) == ["client_id", "audio_time", "probability", "similarity", "auth_success", "approach"]
        assert rec["auth_success"] is True

    def test_reason_key_last(self):
        rec = json.loads(DetectionEvent("c", 1, 0.9, None, False, "A", "why").to_json())
        assert list(rec)[-1] == "reason" and rec["similarity"] is None

    def test_thousand_round_trip(self, tmp_path):
        g = np.random.default_rng(5)
        events = [DetectionEvent(f"c{i % 7}", int(i * 1760), float(g.uniform(0.01, 0.99)),
                                 None if i % 5 == 0 else float(g.uniform(-1, 1)), bool(i % 2), "AB"[i % 2],
                                 "" if i % 3 else "similarity below threshold") for i in range(1000)]
        emit_event_log(events, tmp_path / "e.jsonl")
        assert len((tmp_path / "e.jsonl").read_text().splitlines()) == 1000
        assert read_event_log(tmp_path / "e.jsonl") == events


class TestClipScoring:
    def test_short_clip_padded(self, embedder):
        eng = Engine(PipelineConfig(), embedder, hashed)
        assert eng.clip_windows(np.zeros(1760)).shape == (1, 16, 96)
        assert eng.clip_windows(np.zeros(1000)).shape[0] == 0
        assert eng.clip_windows(np.zeros(1760), pad=False).shape[0] == 0

    def test_window_count(self, embedder):
        eng = Engine(PipelineConfig(), embedder, hashed)
        n_chunks = 40
        frames = 9 * n_chunks
        expected = (frames - 76) // 8 + 1 - 15
        assert eng.clip_windows(np.zeros(1760 * n_chunks)).shape[0] == expected

    def test_probabilities_bypass_gate(self, embedder):
        eng = Engine(PipelineConfig(), embedder, constant(0.99))
        assert np.all(eng.clip_probabilities(np.zeros(1760 * 40)) == 0.99)
