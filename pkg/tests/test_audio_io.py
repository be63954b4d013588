import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import tone
from wakegate import audio_io
from wakegate.audio_io import VadParams, read_wav, rms, rms_normalize, vad_trim, write_wav
from wakegate.errors import NotWav, SilentInput, TruncatedFile, UnsupportedFormat


def _raw_wav(ints, rate=16000, channels=1, bits=16, tag=1):
    pcm = np.asarray(ints, dtype="<i2").tobytes()
    block = channels * bits // 8
    return struct.pack("<4sI4s4sIHHIIHH4sI", b"RIFF", 36 + len(pcm), b"WAVE", b"fmt ", 16, tag,
                       channels, rate, rate * block, block, bits, b"data", len(pcm)) + pcm


class TestReadWav:
    @pytest.mark.parametrize("value,expected", [(0, 0.0), (-32768, -1.0), (32767, 32767 / 32768)])
    def test_sample_mapping(self, tmp_path, value, expected):
        path = tmp_path / "x.wav"
        path.write_bytes(_raw_wav([value]))
        assert read_wav(path)[0] == expected
        assert expected == 0.999969482421875 or value != 32767

    def test_length_preserved(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(_raw_wav(np.arange(-50, 50)))
        assert read_wav(path).size == 100

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(b"OggS" + b"\0" * 60)
        with pytest.raises(NotWav):
            read_wav(path)

    @pytest.mark.parametrize("kw", [dict(rate=44100), dict(channels=2), dict(bits=8), dict(tag=3)])
    def test_unsupported(self, tmp_path, kw):
        path = tmp_path / "x.wav"
        path.write_bytes(_raw_wav([0, 0, 0, 0], **kw))
        with pytest.raises(UnsupportedFormat):
            read_wav(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(_raw_wav(np.zeros(100))[:-20])
        with pytest.raises(TruncatedFile):
            read_wav(path)

    def test_skips_unknown_chunks(self, tmp_path):
        raw = _raw_wav([1, 2, 3])
        extra = b"LIST" + struct.pack("<I", 3) + b"abc\0"
        raw = raw[:36] + extra + raw[36:]
        path = tmp_path / "x.wav"
        path.write_bytes(raw)
        np.testing.assert_array_equal(read_wav(path), np.array([1, 2, 3]) / 32768)


class TestWriteWav:
    def test_round_trip(self, tmp_path):
        write_wav(np.array([0.0, 0.5]), tmp_path / "a.wav")
        np.testing.assert_allclose(read_wav(tmp_path / "a.wav"), [0.0, 0.5], atol=1 / 32768)

    def test_empty(self, tmp_path):
        write_wav(np.array([]), tmp_path / "e.wav")
        assert read_wav(tmp_path / "e.wav").size == 0

    def test_full_scale_negative(self, tmp_path):
        write_wav(np.array([-1.0]), tmp_path / "n.wav")
        raw = (tmp_path / "n.wav").read_bytes()
        assert struct.unpack("<h", raw[44:46])[0] == -32768

    def test_readable_by_stdlib(self, tmp_path):
        import wave

        write_wav(tone(440, 0.1), tmp_path / "t.wav")
        with wave.open(str(tmp_path / "t.wav")) as wf:
            assert (wf.getnchannels(), wf.getsampwidth(), wf.getframerate()) == (1, 2, 16000)
            assert wf.getnframes() == 1600

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.integers(0, 300), elements=st.floats(-1.0, 1.0)))
    def test_round_trip_property(self, tmp_path_factory, clip):
        path = tmp_path_factory.mktemp("wav") / "p.wav"
        write_wav(clip, path)
        back = read_wav(path)
        assert back.size == clip.size
        assert np.all(np.abs(back - clip) <= 1 / 32768)


class TestRmsNormalize:
    def test_already_at_target(self):
        clip = np.full(100, 0.1) * np.where(np.arange(100) % 2, 1, -1)
        out, clipped = rms_normalize(clip, -20)
        np.testing.assert_allclose(out, clip, rtol=1e-12)
        assert clipped == 0

    def test_gain_two(self):
        clip = np.full(100, 0.05)
        out, _ = rms_normalize(clip, -20)
        np.testing.assert_allclose(out / clip, 2.0, rtol=1e-12)

    def test_silent(self):
        with pytest.raises(SilentInput):
            rms_normalize(np.zeros(100))

    def test_clipping_reported(self):
        clip = np.array([0.001] * 99 + [0.5])
        out, clipped = rms_normalize(clip, -3)
        assert clipped == 1 and out.max() == 1.0

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.integers(10, 200), elements=st.floats(-0.2, 0.2)),
           st.floats(-30, -15))
    def test_target_and_idempotence(self, clip, target):
        if rms(clip) <= 1e-6:
            return
        once, clipped = rms_normalize(clip, target)
        if clipped:
            return
        assert abs(rms(once) / 10 ** (target / 20) - 1) < 1e-6
        twice, _ = rms_normalize(once, target)
        assert np.max(np.abs(twice - once)) < 1e-6


def _oracle_onset(clip, frame_len=400, hop=160):
    """First frame containing any energy, by direct per-frame summation."""
    f = 0
    while f * hop + frame_len <= len(clip):
        if sum(float(v) * float(v) for v in clip[f * hop : f * hop + frame_len]) > 0:
            return f * hop
        f += 1
    return None


class TestVad:
    def test_all_zero(self):
        out, speech = vad_trim(np.zeros(16000))
        assert out.size == 0 and not speech

    def test_leading_silence_removed(self):
        clip = np.concatenate([np.zeros(8000), tone(1000, 0.5)])
        out, speech = vad_trim(clip)
        assert speech
        start = clip.size - out.size
        np.testing.assert_array_equal(out, clip[start:])
        params = VadParams()
        assert abs(start - 8000) <= params.hop + params.hangover_frames * params.hop
        assert start == _oracle_onset(clip) == 7680

    def test_all_tone_unchanged(self):
        clip = tone(1000, 1.0)
        out, speech = vad_trim(clip)
        assert speech
        np.testing.assert_array_equal(out, clip)

    def test_trailing_silence_kept_within_hangover(self):
        clip = np.concatenate([np.zeros(4000), tone(500, 0.5), np.zeros(8000)])
        out, speech = vad_trim(clip)
        assert speech
        end = 4000 + 8000
        assert out.size > 8000
        assert clip.size - 4000 - out.size >= 0
        # the tone ends at sample 12000; kept audio stops at most a frame plus hangover later
        start = 4000 - 400
        assert start + out.size <= end + 400 + 5 * 160

    def test_short_blip_ignored(self):
        clip = np.zeros(16000)
        clip[8090:8110] = 0.5  # inside frames 49 and 50 only
        out, speech = vad_trim(clip, VadParams(min_speech_frames=3))
        assert not speech

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 12000), st.integers(400, 8000), st.integers(0, 8000))
    def test_contiguous_subrange(self, lead, body, tail):
        clip = np.concatenate([np.zeros(lead), tone(700, body / 16000), np.zeros(tail)])
        out, _ = vad_trim(clip)
        assert out.size <= clip.size
        if out.size:
            # locate the output inside the input
            for s in range(clip.size - out.size + 1):
                if np.array_equal(clip[s : s + out.size], out):
                    break
            else:
                pytest.fail("output is not a contiguous sub-range")


def test_quantize_matches_disk_round_trip(tmp_path, rng):
    clip = rng.uniform(-1, 1, 500)
    write_wav(clip, tmp_path / "q.wav")
    np.testing.assert_array_equal(audio_io.quantize(clip), read_wav(tmp_path / "q.wav"))
