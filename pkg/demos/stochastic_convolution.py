"""Tails and covariance of the stochastic convolution against Gaussian oracles."""

from shelab import verify as vf

tails = vf.tail_report(1.0, 1.0, [0.0, 1.0, 2.0], 20_000, seed=1)
for lam, emp, lo, hi, orc in zip(tails.lambda_grid, tails.empirical, tails.wilson_low,
                                 tails.wilson_high, tails.oracle):
    print(f"P(I >= (1/pi)^(1/4) * {lam:g}) = {emp:.4f}  Wilson [{lo:.4f}, {hi:.4f}]  "
          f"oracle {orc:.4f}")

cov = vf.covariance_decay(1.0, 1.0, [0.0, 1.0, 2.0, 10.0], ("identity", "tanh"), 20_000, seed=2)
for name, row in zip(cov.g_names, cov.empirical):
    cells = ", ".join(f"x={x:g}: {c:+.4f}" for x, c in zip(cov.x_list, row))
    print(f"Cov[g(I(1,x)), g(I(1,0))], g={name}: {cells}")
print("identity oracle:", ", ".join(f"{o:.4f}" for o in cov.oracle))
