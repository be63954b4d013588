"""
From raw samples to classifier features
=======================================

Audio arrives in 1760-sample chunks. Each chunk becomes nine 32-bin log-mel
frames, 76 frames become one 96-d embedding, and 16 embeddings make one
classifier input.
"""

import numpy as np

from wakegate import dsp
from wakegate.backbone import embed, init_native_embedder
from wakegate.pipeline import PipelineConfig

SR = 16000

# %%
# One chunk of a 1 kHz tone. The STFT uses a 400-sample periodic Hann window,
# hop 160, zero-padded to 512 points, so the tone peaks in bin 1000*512/16000.
t = np.arange(1760) / SR
chunk = 0.5 * np.sin(2 * np.pi * 1000 * t)
power = dsp.stft_power(chunk)
print("STFT frames:", power.shape[0], "peak bin:", int(power[0].argmax()))

# %%
# Mel filtering, natural log with a 1e-6 floor, then x/10 + 2.
mels = dsp.melspectrogram(chunk)
print("mel frames:", mels.shape, "loudest band:", int(mels.mean(0).argmax()))
print("silence maps to", dsp.melspectrogram(np.zeros(1760))[0, 0], "in every bin")

# %%
# The backbone here is a seeded random projection with tanh. It stands in for
# a pretrained network and is identical on every platform for a given seed.
backbone = init_native_embedder(seed=42)
window = np.tile(mels, (9, 1))[:76]
emb = embed(backbone, window)
print("embedding:", emb.shape, "range", round(float(emb.min()), 3), round(float(emb.max()), 3))

# %%
# How much audio the first classification needs.
cfg = PipelineConfig()
for k in (1, 4):
    print(f"classification #{k}: {cfg.frames_for_classification(k)} mel frames,",
          f"{cfg.samples_for_classification(k)} samples ({cfg.samples_for_classification(k) / SR:.2f} s)")
