"""Exact vs. asymptotic shared-key probability along K = 2^m, P = 2^(3m)."""

from keygraph_lab.analytic import p_sq_asymptotic, p_sq_exact

print(f"{'m':>2} {'K':>5} {'P':>11} {'exact':>14} {'asymptotic':>14} {'ratio':>8}")
for m in range(4, 11):
    K, P = 2**m, 2 ** (3 * m)
    exact = p_sq_exact(K, P, 2)
    asym = p_sq_asymptotic(K, P, 2)
    print(f"{m:>2} {K:>5} {P:>11} {exact:>14.6e} {asym:>14.6e} {exact / asym:>8.5f}")
