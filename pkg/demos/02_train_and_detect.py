"""
Training a wakeword classifier and streaming with it
====================================================

Chirps play the wakeword, coloured noise plays everything else. Features come
from the stand-in backbone; the classifier is trained with gradient
accumulation and then run through the streaming gate.
"""

import numpy as np
from _synth import chirp_clip, noise_clip

from wakegate.backbone import init_native_embedder
from wakegate.pipeline import Engine, PipelineConfig
from wakegate.wakeword import TrainConfig, init_fcn, train

rng = np.random.default_rng(0)
backbone = init_native_embedder(42)
featurizer = Engine(PipelineConfig(), backbone, lambda w: 0.0)

# %%
# Every classifier window of each 3 s clip inherits the clip's label. Positives
# get a noise bed too, otherwise "any silence" would be a perfect cue.
pos = [featurizer.clip_windows(chirp_clip(rng) + rng.uniform(0.1, 0.6) * noise_clip(rng)) for _ in range(100)]
neg = [featurizer.clip_windows(noise_clip(rng)) for _ in range(100)]
X = np.concatenate(pos + neg)
y = np.r_[np.ones(sum(map(len, pos))), np.zeros(sum(map(len, neg)))]
print("training windows:", X.shape)

# %%
# 32-item micro-batches, four of them per optimizer step.
config = TrainConfig(learning_rate=0.01, micro_batch=32, accum_steps=4, epochs=120, seed=0)
model, losses = train(init_fcn(seed=0), X, y, config)
print("loss: first epoch %.3f, last epoch %.3f" % (losses[0], losses[-1]))

# %%
# Stream 12 s of noise with two chirps in it. A detection needs four scores
# above 0.5 (a dip decays the count by one) and is followed by 20 skipped
# classifications. The chirps land roughly 2.5-3.6 s and 8-9.1 s in.
stream = noise_clip(rng, 12.0) * 0.3
for at in (2.0, 7.5):
    burst = chirp_clip(rng, 3.0)
    start = int(at * 16000)
    stream[start : start + burst.size] += burst
engine = Engine(PipelineConfig(), backbone, model)
engine.register_client("kitchen")
for start in range(0, stream.size, 1600):
    for event in engine.step("kitchen", stream[start : start + 1600]):
        print(f"wakeword at {event.audio_time / 16000:.2f} s, p={event.probability:.3f}, reason: {event.reason}")
