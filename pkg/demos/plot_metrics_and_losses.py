"""
Overlap metrics and training losses
===================================

Compare a reference lung mask with a few degraded predictions, then check
the loss functions against their closed forms.
"""

import math

import numpy as np
from scipy import ndimage

from cxr_regions import metrics
from cxr_regions.synthgen import ap_spec, make_phantom

_, truth = make_phantom(ap_spec())
ref = truth.mask

# %%
# Shifted and eroded predictions. Dice falls and the surface distance grows
# with the shift.
preds = {
    "identical": ref.bits,
    "shift 3 px": np.roll(ref.bits, 3, axis=1),
    "shift 8 px": np.roll(ref.bits, 8, axis=1),
    "eroded 2 px": ndimage.binary_erosion(ref.bits, iterations=2),
}
rows = []
for name, pred in preds.items():
    m = metrics.evaluate_case(pred, ref)
    rows.append(m)
    print(f"{name:12s} dice {m.dice:.4f}  prc {m.precision:.4f}  rcl {m.recall:.4f}  asd {m.asd:.2f}")

summary = metrics.summarize(rows)
print("summary:", metrics.format_table_row(summary))

# %%
# Losses. A flat 0.5 prediction costs ln 2 in cross-entropy whatever the
# target, and the Dice loss of a binary prediction is minus its Dice.
y = ref.bits
flat = np.full(y.shape, 0.5)
print("bce(0.5) - ln 2 =", metrics.bce_loss(flat, y) - math.log(2))
shifted = preds["shift 3 px"].astype(float)
print("dice_loss(binary) + dice =", metrics.dice_loss(shifted, y) + metrics.dice(shifted > 0, y))
print("combined =", round(metrics.combined_loss(flat, y), 4))
