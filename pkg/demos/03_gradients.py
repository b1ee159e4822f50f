"""
Checking backpropagation against finite differences
===================================================

The network is built from a handful of differentiable operations.  Each one
records a closure for its backward pass; here we compare those gradients with
central differences on a small version of the fusion model.
"""

import numpy as np

from emofusion.gradcheck import check_gradients
from emofusion.model import ModelConfig, init_model
from emofusion.tensor import Tensor, conv2d, softmax_cross_entropy

rng = np.random.default_rng(1)

# %%
# One convolution layer first.
x = Tensor(rng.uniform(-1, 1, (2, 6, 6)), requires_grad=True)
k = Tensor(rng.uniform(-1, 1, (3, 2, 3, 3)), requires_grad=True)
b = Tensor(np.zeros(3), requires_grad=True)
w = Tensor(rng.uniform(-1, 1, (3, 6, 6)))
err = check_gradients(lambda: (conv2d(x, k, b, padding=1) * w).sum(), [x, k, b])
print(f"conv2d: worst relative error {err:.1e}")

# %%
# Now the whole model, shrunk so every parameter can be probed.
small = ModelConfig(n_frames=3, visual_height=12, visual_width=10, audio_height=8, audio_width=12,
                    visual_feature_len=8, audio_feature_len=2, hidden_len=5,
                    visual_channels=(2, 3, 2), visual_kernels=(3, 3, 3),
                    audio_channels=(2, 2), audio_kernels=(3, 1))
model = init_model(small)
for name, p in model.params.items():
    if name.endswith(".bias"):
        p.data[:] = 0.05  # keep ReLUs active so the loss is not flat
frames = rng.uniform(0, 1, (4,) + small.visual_shape)
spec = rng.uniform(0, 1, (4,) + small.audio_shape)
labels = np.array([0, 2, 4, 5])

err = check_gradients(lambda: softmax_cross_entropy(model.forward_fused(frames, spec), labels),
                      model.parameters())
print(f"fusion model ({sum(p.size for p in model.parameters())} parameters): worst relative error {err:.1e}")
