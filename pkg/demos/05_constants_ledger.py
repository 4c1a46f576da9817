"""The explicit constant-selection system behind the iteration.

rho solves three inequalities (near-field containment, flow containment,
the hard cap 1/16), delta then comes from the measured oscillation
improvement eta, and the closing polynomial bound must stay below one.
"""

import numpy as np

from sqgdiag.constants import (
    build_ledger,
    choose_delta,
    choose_rho,
    verify_closing_inequality,
)

print("rho against increasingly strong velocity constants (alpha = 0.95):")
for L, C in [(0.0, 0.0), (1.0, 0.5), (3.0, 2.0), (0.0, 5.0), (10.0, 10.0)]:
    print(f"  L = {L:5.1f}, C = {C:5.1f}  ->  rho = {choose_rho(L, C, 0.95):.6f}")

print("\ndelta from the measured improvement eta (rho = 1/16):")
for eta in (0.05, 0.1, 0.2, 0.5, 0.9):
    d = choose_delta(1 / 16, eta)
    print(f"  eta = {eta:4.2f}  ->  delta = {d:.4f}  (rho^delta = {(1/16)**d:.4f})")

print("\nclosing inequality at the cap rho = 1/16:")
for delta in (0.01, 0.038, 0.1, 0.5):
    res = verify_closing_inequality(1 / 16, delta)
    print(f"  delta = {delta:5.3f}: value = {res.value:.6f}, majorant = {res.majorant:.6f}, "
          f"chain {'holds' if res.chain_holds else 'broken'} -> "
          f"{'PASS' if res.passed else 'FAIL'}")

print("\nfull ledger for one measured parameter set:")
print(build_ledger(L=0.7, C=1.2, alpha=0.95, eta=0.25, M=1.3).to_json())

# the majorant x (3/2 - x^2/2) approaches its maximum 1 only as x -> 1
rhos = np.linspace(1e-6, 1 / 16, 200)
deltas = np.linspace(1e-6, 10.0, 200)
R, D = np.meshgrid(rhos, deltas)
X = R ** (D / 2)
maj = X * (1.5 - 0.5 * X * X)
print(f"\nsweep over {maj.size} (rho, delta) pairs: max majorant = 1 - {1 - maj.max():.2e}")
