"""Fast-update baselines against Kiefer-Wolfowitz at equal simulation time.

Scenario 1 keeps the step sizes of the slow algorithm and updates every 100
or 1000 transitions of a single continuing trajectory. Scenario 2 scales the
step sizes by update_every / tau. The oscillation flag marks trajectories
that swing across the whole range [0, N].
"""
import warnings
from pathlib import Path

import numpy as np

from serverless_kw import (
    CostOracle,
    locate_minimum,
    oscillation_flag,
    run_fast_update,
    run_kw,
    write_trajectory_csv,
)
from serverless_kw.config import load_config

root = Path(__file__).resolve().parent.parent
out = root / "runs" / "notebooks"
out.mkdir(parents=True, exist_ok=True)
warnings.simplefilter("ignore")

cfg = load_config(root / "configs" / "scaled_n5.ini")
params = cfg.model()
theta_star, _ = locate_minimum(CostOracle(params, cfg.weights), cfg.search_bracket)
seeds = range(10)

kw = [run_kw(1.0, cfg.schedules, params, cfg.weights, cfg.smoothing, seed=s) for s in seeds]
print(f"kw: median |err| {np.median([abs(t.theta_final - theta_star) for t in kw]):.2f}")

for scenario in (1, 2):
    for ue in cfg.update_every:
        scale = 1.0 if scenario == 1 else ue / cfg.schedules.tau
        trajs = [
            run_fast_update(1.0, cfg.schedules, params, cfg.weights, cfg.smoothing, ue, scale, seed=s)
            for s in seeds
        ]
        write_trajectory_csv(trajs[0], out / f"fast_s{scenario}_u{ue}_seed0.csv",
                             clamp=(-params.N, 2 * params.N))
        errs = [abs(t.theta_final - theta_star) for t in trajs]
        flags = sum(oscillation_flag(t, params.N) for t in trajs)
        print(f"scenario {scenario}, every {ue:4d}: median |err| {np.median(errs):.2f}, "
              f"oscillation flags {flags}/{len(trajs)}")
