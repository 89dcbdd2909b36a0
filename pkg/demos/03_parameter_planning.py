"""Planning (k, M) from a threshold and a precision budget.

Given a distance threshold T, a total precision epsilon, and a confidence
exponent beta (failure probability at most 2^-beta), the planner splits the
budget between curve bias and sampling error and sizes the alphabet and the
hash length.
"""

from modhash import bias_bound, plan_k, plan_m, plan_parameters

print("reference point: k = 8 with epsilon_stat = 0.5 and beta = 10")
print(f"  plan_m(8, 0.5, 10) = {plan_m(8, 0.5, 10)}  (estimate good to 0.5 w.p. > 0.999)\n")

for threshold, epsilon in [(1.9, 1.0), (5.0, 1.0), (10.0, 0.2)]:
    params = plan_parameters(threshold, epsilon, beta=10)
    print(f"T = {threshold:5.1f}, epsilon = {epsilon:4.1f}  ->  k = {params.k:3d}, M = {params.m:7d}")
    print(
        f"    bias at threshold: F({threshold:g}, {params.k}) = "
        f"{bias_bound(threshold, params.k):.4f} <= {params.epsilon_bias:.2f}"
    )

print("\nk grows ~ linearly with T; M grows with k^2 / epsilon^2, so tight")
print("budgets on wide thresholds are expensive -- that is the whole tradeoff.")
print(f"\nsmallest even alphabet for T = 10, bias budget 0.1: k = {plan_k(10.0, 0.1)}")
