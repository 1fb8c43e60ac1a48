"""Null check: the first crystal's probe light does not stimulate the second.

Interference here relies on spontaneous, not stimulated, pair creation:
the crystal-2 emission rate must not change when probe light from
crystal 1 is physically blocked from reaching it.  The check records the
blocked/unblocked count ratio across pump powers; the expected ratio is
exactly 1 at every power, and the fitted slope against power should be
consistent with zero.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from qiup import induced_emission_check
from qiup.scenarios import build_scenario

OUT = Path(__file__).parent / "out" / "no_induced_emission"
OUT.mkdir(parents=True, exist_ok=True)

scenario = build_scenario("induced_emission_check",
                          {"geometry": {"rows": 64, "cols": 64},
                           "camera": {"rng_seed": 5}})
powers = [50, 100, 150, 200, 250, 300]
rows = induced_emission_check(scenario, powers, repeats=40)

x = np.array([r.power_mw for r in rows])
ratio = np.array([r.ratio for r in rows])
means = [ratio[x == p].mean() for p in powers]
errs = [ratio[x == p].std() / np.sqrt(40) for p in powers]

design = np.column_stack([np.ones_like(x), x])
coef, *_ = np.linalg.lstsq(design, ratio, rcond=None)
resid = ratio - design @ coef
se = np.sqrt((resid @ resid) / (len(x) - 2)
             * np.linalg.inv(design.T @ design)[1, 1])

fig, ax = plt.subplots(figsize=(6.5, 4.2))
ax.errorbar(powers, means, yerr=errs, fmt="D", color="tab:blue", capsize=4)
ax.axhline(1.0, color="k", lw=0.8)
dense = np.linspace(40, 310, 50)
ax.plot(dense, coef[0] + coef[1] * dense, "k--", alpha=0.6,
        label=f"slope = ({coef[1]:.1e} +/- {se:.1e}) /mW")
ax.set_xlabel("pump power (mW)")
ax.set_ylabel("blocked / unblocked count ratio")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "ratio_vs_power.png", dpi=130)
print(f"wrote {OUT / 'ratio_vs_power.png'}")
print(f"fitted slope {coef[1]:.2e} /mW with standard error {se:.2e} /mW")
