"""
FRR, FAR and the equal error rate
=================================

A clip is accepted when its score is at or above the threshold. The sweep
steps the threshold from 0 to 1 by 0.05 and interpolates the crossing; the
exact method interpolates over every distinct score instead.
"""

import numpy as np

from wakegate.evalkit import ScoreSet, eer, exact_operating_points, sweep

rng = np.random.default_rng(3)
scores = ScoreSet(positives=rng.beta(5, 2, 300), negatives=rng.beta(2, 5, 300))

print("threshold   FRR    FAR")
for point in sweep(scores)[::4]:
    print(f"   {point.threshold:.2f}   {point.frr:.3f}  {point.far:.3f}")

for method in ("sweep_interpolated", "exact"):
    result = eer(scores, method)
    print(f"{method:>18}: EER {100 * result.eer:.2f}% at threshold {result.threshold:.3f}")

thresholds, _, _ = exact_operating_points(scores)
print("exact method looked at", thresholds.size, "operating points")
