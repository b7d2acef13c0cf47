"""Heat-kernel identities and the squared-kernel mass that drives the noise variance."""

import numpy as np

from shelab.kernel import (
    product_identity_residual,
    squared_identity_residual,
    squared_kernel_mass,
    squared_kernel_mass_quadrature,
)

rng = np.random.default_rng(0)
worst_product = worst_squared = 0.0
for _ in range(200):
    t = rng.uniform(0.1, 5.0)
    s = t * rng.uniform(0.05, 0.95)
    x, y, z = rng.uniform(-2, 2, 3)
    worst_product = max(worst_product, product_identity_residual(t, s, x, y, z))
    worst_squared = max(worst_squared, squared_identity_residual(t, s, 0.5 * s, x, z))
print(f"product identity, worst relative residual over 200 tuples: {worst_product:.2e}")
print(f"squared identity, worst relative residual over 200 tuples: {worst_squared:.2e}")

for t, r in [(1.0, 1.0), (1.0, 0.5), (4.0, 1.0)]:
    closed = squared_kernel_mass(t, r)
    quad = squared_kernel_mass_quadrature(t, r)
    print(f"int_0^{r:g} int p_(t-s)^2, t={t:g}: closed {closed:.10f}, quadrature {quad:.10f}")
