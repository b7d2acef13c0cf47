"""Hitting time of G' = B(G) and the lower bound it forces on dominating paths."""

from shelab.drift import DriftSpec, osgood_integral
from shelab.ode import HittingProblem, hitting_time, solve_comparison, verify_lower_bound

B = DriftSpec("monomial", (2.0, 1.0))
p = HittingProblem(B, 1.0, 10.0)
T = hitting_time(p)
G = solve_comparison(p, 2 * T, 1e-3)
print(f"T = int_1^10 ds/s^2 = {T:.12f}; integrated solution reaches 10 at {G.hit_time:.6f}")

faster = solve_comparison(HittingProblem(B, 1.3, 12.0, scale=1.5), 2 * T, T / 1000)
check = verify_lower_bound(faster.G, p, t=faster.t)
print(f"dominating path: {check.status}, inf over [T, 2T] = {check.inf_on_window:.3f} >= 10")

for name, b in [("1+y^2", DriftSpec("power", (2.0,))), ("1+y", DriftSpec("affine", (1.0,))),
                ("e^y", DriftSpec("exponential", (1.0, 1.0)))]:
    v = osgood_integral(b)
    print(f"int_1^inf dy/({name}): {v.status} {v.value:.10g}")
