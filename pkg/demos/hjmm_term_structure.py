"""Forward-curve dynamics with stochastic volatility.

Simulates one Wong-Zakai path of the forward-rate curve and the volatility
factor, then prices zero-coupon bonds off the terminal curve.

Run: ``python3 demos/hjmm_term_structure.py``
"""

import numpy as np

from wongzakai.hjmm import ForwardCurve, HJMMParams, bond_price, build_hjmm_model, hbeta_norm
from wongzakai.noise import BrownianLattice
from wongzakai.schemes import simulate

params = HJMMParams()
model = build_hjmm_model(params)
T = 1.0
lat = BrownianLattice.sample(7, model.r, T, 256)
states = simulate("wz", model, model.params["x0"], lat.increments[None], T, 16)[0]

start = ForwardCurve(params.x, states[0, :-1], params.beta)
end = ForwardCurve(params.x, states[-1, :-1], params.beta)
print(f"volatility factor: {states[0, -1]:+.3f} -> {states[-1, -1]:+.3f}")
print(f"H_beta norm of the curve: {hbeta_norm(start):.4f} -> {hbeta_norm(end):.4f}")
print(f"\n{'maturity':>8}  {'f(0, x)':>8}  {'f(T, x)':>8}  {'P(0, x)':>8}  {'P(T, T+x)':>9}")
for x in (0.25, 1, 2, 5, 10, 20, 30):
    print(f"{x:8g}  {start(x):8.4%}  {end(x):8.4%}  {bond_price(start, x):8.5f}  {bond_price(end, x):9.5f}")
print(f"\nlong rate {end.long_rate:.4%}; largest curve move {np.max(np.abs(end.values - start.values)):.2e}")
