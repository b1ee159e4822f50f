"""
Frame sampling, face crops and augmentation
===========================================

Clips have varying frame counts.  Twenty frames are sampled evenly, each is
cropped to its face box and resized to 98x80, and the stack can then be
augmented with one shared flip/crop/rotation/brightness draw.
"""

import numpy as np

from emofusion import vision
from emofusion.vision import AugmentParams, FaceBox

rng = np.random.default_rng(0)

# %%
# Even sampling repeats frames for short clips and skips frames for long ones.
for total in (5, 20, 57):
    print(f"{total:3d} frames ->", vision.sample_indices(total, 20).tolist())

# %%
# A fake 37-frame clip with a bright square "face" drifting to the right.
frames = []
for i in range(37):
    img = rng.uniform(0, 0.1, size=(120, 100))
    img[20:90, 10 + i // 4:70 + i // 4] += 0.6
    frames.append(img)
boxes = {0: FaceBox(0, 10, 20, 60, 70), 20: FaceBox(20, 15, 20, 60, 70)}

stack = vision.prepare_visual(frames, boxes)
print("visual input:", stack.shape, "range", stack.min().round(3), stack.max().round(3))

# %%
# Every frame of a clip gets the same random transform.
params = vision.draw_params(np.random.default_rng(7))
print(params)
aug = vision.apply_augmentation(stack, params)

# Identity parameters leave the stack untouched; flipping twice undoes itself.
assert np.array_equal(vision.apply_augmentation(stack, AugmentParams()), stack)
flip = AugmentParams(flip=True)
assert np.array_equal(vision.apply_augmentation(vision.apply_augmentation(stack, flip), flip), stack)

# %%
# The training set grows to the original plus 30 seeded variants per clip.
variants = vision.expand_dataset(stack, base_seed=100)
print(len(variants), "variants; mean brightness",
      np.round([v.mean() for v in variants[:5]], 3), "...")
