"""Campaign runner: sweep solver settings and tabulate iteration counts.

Reproduces the layout of the transient solver-comparison experiments: the
decoupled solver with an inner-sweep cap of 1..4 against the coupled solver,
all marching the 8-cell scene for a few hours of model time.  Raising the
cap trades Newton steps (fewer) for GMRES iterations (more).

Run:  python demos/05_comparison_campaign.py   (takes a few minutes)
"""

import dataclasses
from pathlib import Path

from intercell import NewtonConfig, RunConfig, run_comparison

out = Path("demo_output/05_campaign")
out.mkdir(parents=True, exist_ok=True)

base = RunConfig(n=2, level=1, dt=0.1, t_final=5.0)
configs, labels = [], []
for cap in (1, 2, 3, 4):
    cfg = dataclasses.replace(
        base, approach="decoupled",
        newton=NewtonConfig(max_iter_fixedpoint=cap))
    configs.append(cfg)
    labels.append(f"decoupled_cap{cap}")
configs.append(dataclasses.replace(base, approach="coupled"))
labels.append("coupled")

rows = run_comparison(configs, labels, out_path=out / "campaign.csv")

print(f"{'run':<16} {'Sum_n':>6} {'Sum_s':>6} {'s/step':>7} {'wall':>7}")
for r in rows:
    print(f"{r['label']:<16} {r['sigma_n']:>6} {r['sigma_s']:>6} "
          f"{r['s_mean']:>7.1f} {r['wall_time']:>6.1f}s")
print(f"\nwrote {out / 'campaign.csv'}")
