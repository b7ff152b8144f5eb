"""Long simulations agree with the exact stationary cost.

Each run simulates 1e7 uniformized steps, cuts the path into batches of 1e5
steps, drops the first ten and compares a 99% batch-means interval with the
oracle value.
"""
from serverless_kw import (
    EMPTY_STATE,
    CostOracle,
    CostWeights,
    ModelParams,
    PolicySpec,
    RngStream,
    batch_means,
    simulate_segment,
)

weights = CostWeights(w1=1, w2=1, w3=5, w4=100, w_rej=1000)

for N in (5, 10):
    params = ModelParams(lam=0.3, mu=1.0, beta=0.1, gamma_exp=0.01, N=N)
    oracle = CostOracle(params, weights)
    for k, theta in enumerate((0.0, 2.0, 5.0)):
        seg = simulate_segment(
            EMPTY_STATE, PolicySpec("simplified", theta), params, 10**7,
            RngStream(3, (N, k)).generator(), weights=weights, batch_size=10**5,
        )
        mean, lo, hi = batch_means(seg.batch_means[10:], 0.99)
        exact = oracle(theta)
        inside = "inside" if lo <= exact <= hi else "OUTSIDE"
        print(f"N={N:2d} theta={theta:3.1f}  oracle {exact:8.4f}  simulated {mean:8.4f} "
              f"[{lo:.4f}, {hi:.4f}]  {inside}")

# with theta = 0 no server ever initializes without a job waiting for it
params = ModelParams(lam=0.3, mu=1.0, beta=0.1, gamma_exp=0.01, N=50)
seg = simulate_segment(EMPTY_STATE, PolicySpec("simplified", 0.0), params, 10**6, RngStream(2).generator())
print("largest number of unbound initializing servers at theta = 0:", seg.max_init0)
