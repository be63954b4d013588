import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wakegate.errors import InsufficientAudio, UnknownWakewordKey
from wakegate.stream_state import ClientState, RingBuffer


class TestRingBuffer:
    def test_overwrite_oldest(self):
        ring = RingBuffer(4)
        ring.push([1, 2, 3, 4, 5, 6])
        assert ring.contents().tolist() == [3, 4, 5, 6]

    def test_wraparound_in_pieces(self):
        ring = RingBuffer(4)
        for v in range(1, 7):
            ring.push([v])
        assert ring.contents().tolist() == [3, 4, 5, 6]
        assert ring.filled == 4 and ring.total == 6

    def test_span_absolute(self):
        ring = RingBuffer(5)
        ring.push(np.arange(12))
        assert ring.span(8, 11).tolist() == [8, 9, 10]
        with pytest.raises(IndexError):
            ring.span(6, 9)
        with pytest.raises(IndexError):
            ring.span(10, 13)

    def test_vector_items(self):
        ring = RingBuffer(3, (2,))
        ring.push([[1, 1], [2, 2]])
        ring.push([[3, 3], [4, 4]])
        assert ring.contents().tolist() == [[2, 2], [3, 3], [4, 4]]

    def test_bad_capacity(self):
        with pytest.raises(ValueError):
            RingBuffer(0)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 9), st.lists(st.lists(st.integers(-100, 100), max_size=15), max_size=20))
    def test_list_oracle(self, capacity, pushes):
        ring = RingBuffer(capacity, dtype=np.int64)
        oracle = []
        for block in pushes:
            ring.push(np.array(block, dtype=np.int64))
            oracle.extend(block)
            kept = oracle[-capacity:] if oracle else []
            assert ring.contents().tolist() == kept
            assert ring.filled == min(capacity, len(oracle)) <= capacity
            assert ring.total == len(oracle)


class TestAudio:
    def test_push_chunk(self):
        s = ClientState("c")
        s.push_audio(np.zeros(1760))
        assert s.pending_audio.size == 1760

    def test_push_empty(self):
        s = ClientState("c")
        s.push_audio([])
        assert s.pending_audio.size == 0 and s.audio_ring.total == 0

    def test_small_audio_ring(self):
        s = ClientState("c", audio_capacity=4)
        s.push_audio([1, 2, 3, 4, 5, 6])
        assert s.audio_ring.contents().tolist() == [3, 4, 5, 6]

    def test_take_chunk_boundaries(self):
        s = ClientState("c")
        s.push_audio(np.zeros(1759))
        assert s.take_mel_chunk() is None
        s.push_audio([1.0])
        assert s.take_mel_chunk().size == 1760 and s.pending_audio.size == 0

    def test_take_chunk_remainder(self):
        s = ClientState("c")
        s.push_audio(np.arange(3600.0))
        first = s.take_mel_chunk()
        assert first[0] == 0 and s.pending_audio.size == 1840
        second = s.take_mel_chunk()
        assert second[0] == 1760 and s.pending_audio.size == 80
        assert s.take_mel_chunk() is None

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 4000), st.booleans()), max_size=30))
    def test_conservation(self, ops):
        s = ClientState("c")
        pushed = consumed = 0
        for n, take in ops:
            s.push_audio(np.zeros(n))
            pushed += n
            if take and (chunk := s.take_mel_chunk()) is not None:
                consumed += chunk.size
        assert consumed + s.pending_audio.size == pushed

    def test_recent_audio(self):
        s = ClientState("c")
        s.push_audio(np.arange(48000.0))
        np.testing.assert_array_equal(s.recent_audio(4000), np.arange(44000.0, 48000.0))
        assert s.recent_audio(27136).size == 27136
        np.testing.assert_array_equal(s.recent_audio(3, end=10), [7.0, 8.0, 9.0])

    def test_recent_audio_insufficient(self):
        s = ClientState("c")
        s.push_audio(np.zeros(100))
        with pytest.raises(InsufficientAudio):
            s.recent_audio(4000)


class TestMels:
    def test_append(self):
        s = ClientState("c")
        s.append_mels(np.zeros((9, 32)))
        assert s.new_mels == 9
        s.append_mels(np.zeros((0, 32)))
        assert s.new_mels == 9

    def test_clamped_to_ring(self):
        s = ClientState("c", mel_capacity=10)
        s.append_mels(np.zeros((25, 32)))
        assert s.mel_ring.filled == 10 and s.new_mels == 10

    def test_insufficient_history(self):
        s = ClientState("c")
        s.append_mels(np.zeros((75, 32)))
        assert s.take_embedding_window(76, 8) is None

    def test_window_grid(self):
        # windows end on frames 76, 84, 92, ... regardless of how frames arrive
        s = ClientState("c")
        frames = np.arange(200 * 32, dtype=float).reshape(200, 32)
        ends = []
        for start in range(0, 200, 9):
            s.append_mels(frames[start : start + 9])
            while (item := s.take_embedding_window(76, 8)) is not None:
                window, end = item
                np.testing.assert_array_equal(window, frames[end - 76 : end])
                ends.append(end)
        assert ends == list(range(76, 201, 8))

    def test_first_window_after_warmup(self):
        s = ClientState("c")
        s.append_mels(np.zeros((76, 32)))
        window, end = s.take_embedding_window(76, 8)
        assert window.shape == (76, 32) and end == 76
        assert s.take_embedding_window(76, 8) is None

    def test_chronological(self):
        s = ClientState("c", n_mels=1)
        s.append_mels(np.arange(100.0).reshape(-1, 1))
        window, _ = s.take_embedding_window(76, 8)
        assert np.all(np.diff(window[:, 0]) > 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 40), max_size=40), st.integers(1, 8))
    def test_new_mels_bounded(self, appends, step):
        s = ClientState("c", mel_capacity=64, n_mels=1)
        for k in appends:
            s.append_mels(np.zeros((k, 1)))
            assert s.new_mels <= s.mel_ring.filled
            s.take_embedding_window(16, step)
            assert 0 <= s.new_mels <= s.mel_ring.filled


class TestEmbeddings:
    def test_append(self):
        s = ClientState("c")
        s.register_wakeword("hey")
        s.append_embedding("hey", np.ones(96))
        assert s.new_embeddings["hey"] == 1

    def test_overwrite(self):
        s = ClientState("c")
        s.register_wakeword("hey")
        for i in range(65):
            s.append_embedding("hey", np.full(96, float(i)))
        ring = s.embedding_rings["hey"]
        assert ring.filled == 64 and ring.contents()[0, 0] == 1.0

    def test_unknown_key(self):
        s = ClientState("c")
        with pytest.raises(UnknownWakewordKey):
            s.append_embedding("nope", np.zeros(96))
        with pytest.raises(UnknownWakewordKey):
            s.take_classification_window("nope")

    def test_classification_stride_one(self):
        s = ClientState("c")
        s.register_wakeword("k")
        got = []
        for i in range(20):
            s.append_embedding("k", np.full(96, float(i)), end_frame=76 + 8 * i)
            while (item := s.take_classification_window("k", 16)) is not None:
                got.append((item[0][0, 0], item[0][-1, 0], item[1]))
        assert got == [(float(i - 15), float(i), 76 + 8 * i) for i in range(15, 20)]
        assert s.new_embeddings["k"] <= s.embedding_rings["k"].filled
