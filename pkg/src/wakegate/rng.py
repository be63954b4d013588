"""SplitMix64 generator.

Used wherever results must be reproducible bit-for-bit across platforms
(stand-in model weights, augmentation draws). Uniform doubles take the high
53 bits of each output.
"""

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1
_INV_2_53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """Scalar SplitMix64 stream."""

    def __init__(self, seed: int):
        self.state = seed & _MASK

    @classmethod
    def for_item(cls, seed: int, index: int) -> "SplitMix64":
        """Independent stream for item ``index`` under a master ``seed``."""
        return cls(_mix((seed + (index + 1) * 0xD1B54A32D192ED03) & _MASK))

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & _MASK
        return _mix(self.state)

    def random(self) -> float:
        """Uniform in [0, 1)."""
        return (self.next_u64() >> 11) * _INV_2_53

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return int(self.random() * n)


def uniform_array(seed: int, n: int, offset: int = 0) -> np.ndarray:
    """Outputs ``offset+1 .. offset+n`` of the stream, mapped to uniform(-1, 1).

    Vectorized equivalent of calling ``2 * SplitMix64(seed).random() - 1`` n
    times after skipping ``offset`` draws.
    """
    k = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK) + k * np.uint64(GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    u = (z >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return 2.0 * u - 1.0
