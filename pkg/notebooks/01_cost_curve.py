"""Exact long-run cost as a function of the reserve.

Builds the generator for the full-scale system (N = 50, about 3e5 states),
solves for the stationary distribution at every point of a grid and locates
the minimizer with a golden-section search. Takes about a minute.
"""
from serverless_kw import CostOracle, CostWeights, ModelParams, locate_minimum, sweep

weights = CostWeights(w1=1, w2=1, w3=5, w4=100, w_rej=1000)

for lam in (0.15, 0.3):
    params = ModelParams(lam=lam, mu=1.0, beta=0.1, gamma_exp=0.01, N=50)
    oracle = CostOracle(params, weights)
    print(f"lam = {lam}")
    for point in sweep(range(0, 11), oracle):
        print(f"  theta = {point.theta:4.1f}  c = {point.cost:9.4f}  residual = {point.residual:.1e}")
    theta_star, c_star = locate_minimum(oracle, (0.0, 10.0))
    c0 = oracle(0.0)
    print(f"  theta* = {theta_star:.3f}  c(theta*) = {c_star:.4f}  c(0) = {c0:.4f}  "
          f"gain = {(c0 - c_star) / c0:.1%}")
