"""Invariant checks and the command line.

The same checks are available as ``serverless-kw validate``; the other
subcommands reproduce the experiments from the files in ``configs/``.
"""
import subprocess
import sys
from pathlib import Path

from serverless_kw import CostWeights, ModelParams, run_validation

params = ModelParams(lam=0.3, mu=1.0, beta=0.1, gamma_exp=0.01, N=5)
for check in run_validation(params, CostWeights(), seed=0):
    print("PASS" if check.passed else "FAIL", check.name, check.measured)

root = Path(__file__).resolve().parent.parent
cmd = [sys.executable, "-m", "serverless_kw.cli", "kw", "--config", str(root / "configs" / "scaled_n5.ini"),
       "--seed", "4", "--out", str(root / "runs" / "notebooks" / "cli_kw")]
print("$", " ".join(cmd[2:]))
print("exit code", subprocess.run(cmd).returncode)
