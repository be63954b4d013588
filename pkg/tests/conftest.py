import numpy as np
import pytest

SR = 16000


def tone(freq, seconds=1.0, amp=0.3, sr=SR, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


def band_noise(centre, width, n, seed, amp=0.3):
    """White noise band-limited to [centre - width/2, centre + width/2] by FFT masking."""
    rng = np.random.default_rng(seed)
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1 / SR)
    spec[np.abs(freqs - centre) > width / 2] = 0
    x = np.fft.irfft(spec, n)
    return amp * x / np.max(np.abs(x))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance criteria report -----------------------------------------------------

ACCEPTANCE_RESULTS = []


def record_criterion(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
