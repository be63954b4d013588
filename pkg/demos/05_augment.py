"""
Seeded augmentation
===================

Each clip index owns its own random stream, so any output can be regenerated
from (clip, plan, index) alone and the ops record says exactly what happened.
"""

import numpy as np
from _synth import chirp_clip, noise_clip

from wakegate.audio_io import rms
from wakegate.augment import AugmentPlan, add_noise_snr, augment_clip

rng = np.random.default_rng(5)
clip = chirp_clip(rng, 1.0)
noise = noise_clip(rng, 0.5)

# %%
# The noise is tiled to the clip length and scaled to the requested SNR.
for snr in (0, 10, 20, 30):
    mixed = add_noise_snr(clip, noise, snr)
    print(f"asked {snr:2d} dB, measured {20 * np.log10(rms(clip) / rms(mixed - clip)):.2f} dB")

# %%
room = np.exp(-np.arange(1600) / 400.0) * rng.standard_normal(1600)
room[0] = 1.0
plan = AugmentPlan(seed=1, noise_bank=[noise], rir_bank=[room])
for index in range(4):
    out, ops = augment_clip(clip, plan, index)
    print(index, [op["op"] for op in ops])

again, _ = augment_clip(clip, plan, 2)
print("index 2 regenerated identically:", np.array_equal(again, augment_clip(clip, plan, 2)[0]))
