# %% [markdown]
# # Monte Carlo dropout on a noisy sine
#
# Train a small MLP with dropout on a synthetic sine wave, keep dropout
# switched on at prediction time and read the spread of 50 forward passes as
# predictive uncertainty.

# %%
import numpy as np

from tsuq import dataio, metrics, uq
from tsuq.ndcore import RngStream
from tsuq.neural import ModelConfig, TrainConfig, build_model, train

frames = dataio.synth_series("sine", 2000, noise_std=0.1, seed=0)
train_ws, test_ws = dataio.split(frames, train_fraction=0.8, past=12, horizon=1)
print("train windows", train_ws.X.shape, "test windows", test_ws.X.shape)

# %% [markdown]
# Build and train. Dropout uses p = 0.2 by default; the loss is MSE because
# the network has a single mean output.

# %%
rng = RngStream(0)
model = build_model(ModelConfig("mlp", "dropout", hidden_units=32), rng.split("init"))
model, history = train(model, train_ws, TrainConfig(epochs=60), rng.split("train"))
print(f"loss: first epoch {history[0]:.4f}, last epoch {history[-1]:.4f}")

# %% [markdown]
# With dropout off, the forward pass is deterministic. With dropout on, each
# pass draws a new mask and the predictions spread out.

# %%
dist = uq.mc_predict(model, test_ws.X, M=50, rng=rng.split("predict"))
y, mu, sigma = test_ws.Y[:, 0], dist.mean[:, 0], dist.std[:, 0]
print(f"mean predictive std {sigma.mean():.3f}   true noise std 0.1 (standardized: {0.1 / test_ws.norm_stats.std[0]:.3f})")

# %%
scores = metrics.bundle(y, mu, sigma, test_ws.target_scale)
print(f"R2 {scores.r2:.3f}  MSE {scores.mse:.4f}  CE {scores.ece:.3f}  NLL {scores.nll:.3f}")

curve = metrics.reliability_curve(y, mu, sigma)
print("level  coverage")
for p, c in zip(curve.levels, curve.coverage):
    print(f"{p:5.1f}  {c:8.3f}")

# %% [markdown]
# Dropout spread only reflects uncertainty about the weights. It says little
# about the irreducible noise, so intervals are usually too narrow and
# coverage falls below the nominal level.
