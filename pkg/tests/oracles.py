"""Frozen reference values from routes independent of the package.

Each constant names the route that produced it (mpmath at 30 digits).
"""

import math

# Gamma(3) / Gamma(5/2): closed form of the left RL derivative of t^2 at order 1/2, t = 1
GAMMA_RATIO_T2_HALF = 1.50450555612735009852821187083

# exp(1) * erfc(1) = E_{1/2}(-1)
ML_HALF_MINUS_ONE = 0.427583576155807004410750344491

# exp(9) * erfc(3) = E_{1/2}(-3)
ML_HALF_MINUS_THREE = 0.179001151181389950419294815314

# Talbot inversion of s^(a-1) / (s^a + lam) at t: E_a(-lam t^a)
ML_LAPLACE = {
    (0.8, math.pi**2, 0.1): 0.251995501112642475443597878457,
    (1.8, math.pi**2, 0.5): -0.176770413131580389660107647356,
    (1.8, math.pi**2, 1.0): -0.568952484000205085780957456492,
    (1.8, math.pi**2, 2.0): 0.232492589827063462620080531506,
    (0.3, 2.0, 1.0): 0.290232226167875339464621855198,
    (0.6, 40.0, 1.0): 0.0113751026875162822780481006364,
    (1.5, 2.0, 1.0): 0.0294306856028264717276099412681,
}

# exp(-pi^2 / 10): heat-kernel decay of sin(pi x) at t = 0.1
HEAT_MODE_T01 = 0.372707838853437893157942092911
