"""Drive the discretized Duffing oscillator to the origin with one feasibility
solve per step, and plot the trajectory if matplotlib is available."""

import numpy as np

from polyar import bench
from polyar.problem import Config

steps = 400
recs = list(bench.duffing_rollout(2, 0.3, [0.4, 0.1], steps, Config(max_workers=1, timeout_s=60.0)))
xs = np.array([r["x"] for r in recs] + [recs[-1]["x_next"]])
us = np.array([r["u"] for r in recs])
print(f"{len(recs)} steps, all verified: {all(r['verify']['ok'] for r in recs)}")
print("final state:", xs[-1], " V:", recs[0]["V"], "->", recs[-1]["V"])

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    raise SystemExit(0)

t = 0.05 * np.arange(len(xs))
fig, ax = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
ax[0].plot(t, xs[:, 0], label="x1")
ax[0].plot(t, xs[:, 1], label="x2")
ax[0].legend()
ax[1].step(t[:-1], us, where="post")
ax[1].set_ylabel("u")
ax[1].set_xlabel("time [s]")
fig.tight_layout()
fig.savefig("duffing_rollout.png", dpi=120)
print("wrote duffing_rollout.png")
