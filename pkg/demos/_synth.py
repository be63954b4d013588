"""Synthetic audio shared by the demos: chirps stand in for a spoken wakeword."""

import numpy as np

SR = 16000


def chirp_clip(rng, seconds=3.0):
    """A rising 0.5-0.8 s chirp placed somewhere in the first two seconds."""
    n = int(seconds * SR)
    dur = rng.uniform(0.5, 0.8)
    t = np.arange(int(dur * SR)) / SR
    f0, f1 = rng.uniform(350, 450), rng.uniform(1800, 2200)
    env = np.sin(np.pi * t / dur) ** 2
    x = np.zeros(n)
    start = min(int(rng.uniform(0.5, 1.6) * SR), n - t.size)
    x[start : start + t.size] = rng.uniform(0.2, 0.5) * env * np.sin(2 * np.pi * (f0 * t + (f1 - f0) * t**2 / (2 * dur)))
    return x


def noise_clip(rng, seconds=3.0):
    """White, brown or pink noise at a random level."""
    n = int(seconds * SR)
    w = rng.standard_normal(n)
    kind = rng.integers(3)
    if kind == 1:
        w = np.cumsum(w)
        w -= np.linspace(w[0], w[-1], n)
    elif kind == 2:
        spec = np.fft.rfft(w) / np.sqrt(np.maximum(np.fft.rfftfreq(n, 1 / SR), 20.0))
        w = np.fft.irfft(spec, n)
    return rng.uniform(0.05, 0.3) * w / np.max(np.abs(w))


def voice(centre_hz, seconds, seed, amp=0.3):
    """Band-limited noise: a crude 'speaker' whose timbre is its frequency band."""
    n = int(seconds * SR)
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    spec[np.abs(np.fft.rfftfreq(n, 1 / SR) - centre_hz) > 200] = 0
    x = np.fft.irfft(spec, n)
    return amp * x / np.max(np.abs(x))
