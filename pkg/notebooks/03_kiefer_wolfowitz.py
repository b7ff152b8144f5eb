"""Kiefer-Wolfowitz runs on a five-server instance.

The exact optimum of this instance is theta* = 2. With the default schedules
(gamma_n = 10/n, delta_n = n^(-2/3)) the sum of gamma_n^2 / delta_n^2
diverges and the iterates scatter far from the optimum. The second part uses
a schedule for which that sum converges (delta_n = n^(-1/6), gamma_n = 1/n)
and more samples per probe.
"""
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from serverless_kw import CostOracle, locate_minimum, run_kw, write_trajectory_csv
from serverless_kw.config import load_config

root = Path(__file__).resolve().parent.parent
out = root / "runs" / "notebooks"
out.mkdir(parents=True, exist_ok=True)
warnings.simplefilter("ignore")

cfg = load_config(root / "configs" / "scaled_n5.ini")
params = cfg.model()
theta_star, _ = locate_minimum(CostOracle(params, cfg.weights), cfg.search_bracket)
print(f"oracle theta* = {theta_star:.3f}")

finals = []
for seed in cfg.seeds:
    traj = run_kw(1.0, cfg.schedules, params, cfg.weights, cfg.smoothing, seed=seed)
    finals.append(traj.theta_final)
    if seed == 0:
        write_trajectory_csv(traj, out / "kw_default_seed0.csv")
finals = np.array(finals)
print(f"default schedules, {len(finals)} seeds: median |theta - theta*| = "
      f"{np.median(np.abs(finals - theta_star)):.2f}, within 0.5: {np.mean(np.abs(finals - theta_star) < 0.5):.0%}")

valid = load_config(root / "configs" / "scaled_n5_valid_schedule.ini")
print("summable:", valid.schedules.summable())
finals = []
for seed in range(10):
    traj = run_kw(1.0, valid.schedules, params, valid.weights, valid.smoothing, seed=seed)
    finals.append(traj.theta_final)
finals = np.array(finals)
print(f"summable schedule, 10 seeds: finals {np.round(finals, 2)}, "
      f"within 0.5: {np.mean(np.abs(finals - theta_star) < 0.5):.0%}")

# same algorithm with a long constant segment instead of tau * log(n + 1)
const = replace(cfg.schedules, tau_mode="const")
traj = run_kw(1.0, const, params, cfg.weights, cfg.smoothing, seed=0)
print(f"constant segments: {traj.n[-1]} episodes, final theta {traj.theta_final:.2f}")
