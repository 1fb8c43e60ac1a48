"""Interaction-free detection of an opaque object.

With no object, the destructive output H is perfectly dark.  Put an
opaque pixel in the probe path and H lights up; a click at H together
with a click of the idler detector says "something blocked the probe"
even though the detected photon provably never touched the object (and
the clicking idler photon never reached it either, it was reflected
before the object plane).  The map below gives, per pixel, that
coincidence probability: eta/4 where the object is opaque, 0 where it
is transparent.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from qiup import interaction_free_map, pgm
from qiup.scenarios import build_scenario

OUT = Path(__file__).parent / "out" / "interaction_free"
OUT.mkdir(parents=True, exist_ok=True)

scenario = build_scenario("interaction_free")
prob = interaction_free_map(scenario)
pgm.write_pgm16(OUT / "ifm.pgm", prob * 65535.0,
                comments=["scale=65535 per unit probability"])

fig, ax = plt.subplots(figsize=(5.5, 4.5))
im = ax.imshow(prob, cmap="viridis", vmin=0, vmax=0.25)
ax.set_title("P(click at H AND idler click) per pixel")
ax.axis("off")
fig.colorbar(im, ax=ax, fraction=0.046)
fig.tight_layout()
fig.savefig(OUT / "ifm.png", dpi=130)

# Monte Carlo sanity: opaque pixels flag the object in ~ eta/4 of shots
rng = np.random.default_rng(4)
shots = 20_000
clicks = rng.binomial(shots, prob.max())
print(f"wrote {OUT / 'ifm.png'}")
print(f"opaque pixel: {clicks} flags in {shots} shots "
      f"(expected about {prob.max():.2f} of them)")
print(f"transparent pixels flag in {prob.min():.0f} shots, ever")
