"""
Enrolling a speaker and verifying triggers
==========================================

Approach B encodes the last 4000 samples (0.25 s) into a 256-d unit vector and
compares it with the enrolled reference. Approach A averages 50 frames of a
96-bin mel spectrogram and must clear both the auth and the wake threshold.
"""

import numpy as np
from _synth import voice

from wakegate.speaker_auth import AuthConfig, authenticate, enroll, init_native_encoder

encoder = init_native_encoder(seed=7)
alice = [voice(800, 2.0, seed=s) for s in range(3)]
bob = voice(2500, 2.0, seed=10)

for approach in ("B", "A"):
    cfg = AuthConfig(approach=approach, auth_threshold=0.8, wake_threshold=0.5)
    profile = enroll(alice, encoder, cfg)
    print(f"approach {approach}: enrolled {profile.enrolled_clips} clips")
    for name, clip in (("alice (enrolled clip)", alice[0]), ("alice (new take)", voice(800, 2.0, seed=99)),
                       ("bob", bob)):
        result = authenticate(profile, clip, encoder, cfg)
        print(f"  {name:22s} similarity {result.similarity:.4f} -> {'accept' if result.success else 'reject'}")

# %%
# Too little audio is reported, not raised.
short = authenticate(enroll(alice, encoder), np.zeros(2000), encoder, AuthConfig())
print("2000 samples:", short.success, short.similarity, short.reason)
