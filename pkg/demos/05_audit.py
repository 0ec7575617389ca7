"""Check transferability conditions in closed form and by Monte Carlo."""

import numpy as np

from shiftmatch import audit
from shiftmatch import synthdata as sd

print("gaussian var 2 -> 1:", audit.check_gaussian([[2.0]], [[1.0]]).margin)
print("gaussian S_Q = 2 S_P:", audit.check_gaussian(np.eye(2), 2 * np.eye(2)).satisfied)
for mu_p in (0.5, 1.9, 2.0):
    v = audit.check_gamma(mu_p, 1.0, 1.0, 1.0)
    print(f"exponential rates P={mu_p} Q=1: satisfied={v.satisfied} margin={v.margin:.3f}")
print("pareto M=1, 1 -> 2.01:", audit.check_pareto(1.0, 2.01, M=1.0).to_dict()["inequalities"][-1])
print("cusp domain s=2 d=3:", audit.check_boundary_uniform(2, 3, 4, 0).margin)

# The integral of f_Q^2 / f_P is finite iff 2 mu_Q > mu_P; the sampler
# flags the divergent case from the shape of the summands.
for mu_p in (0.5, 1.5, 2.0, 3.0):
    m2, _ = audit.estimate_family_integrals(sd.exponential(mu_p), sd.exponential(1.0), 10**6, seed=0)
    exact = 1.0 / (mu_p * (2.0 - mu_p)) if mu_p < 2 else float("inf")
    print(f"mu_P {mu_p}: m2 {m2.value:8.3f} +- {m2.std_err:.3f} (exact {exact:.3f}) "
          f"diverging={m2.diverging} top-1% share {m2.top_share:.2f}")
