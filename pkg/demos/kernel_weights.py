"""
Half-step weights for a sub-one Caputo derivative
=================================================

The discrete derivative at t_{n-1/2} is a weighted sum of past increments.
This walks through the weights and the properties the stability argument
leans on, including the one that does not hold for small orders.
"""

import numpy as np

from fracflow.kernels import kernel_matrix, quadratic_form, sub_one_weights, super_one_weights

# %%
# For alpha = 0.5 the first weights match hand values.
print(sub_one_weights(0.5, 1).weights)   # [0.7071068]
print(sub_one_weights(0.5, 2).weights)   # [0.7302236 0.4945213]

# %%
# They always sum to (n - 1/2)^(1 - alpha). This is the condition that
# makes the operator exact for linear functions.
for alpha in (0.2, 0.5, 0.8):
    c = sub_one_weights(alpha, 50).weights
    print(f"alpha={alpha}: sum={c.sum():.12f}  target={(49.5) ** (1 - alpha):.12f}")

# %%
# The chain c_1 > c_2 > ... > c_{n-1} holds for every order. The first link
# c_0 > c_1 does not hold for small orders: c_0 = a_0 + b_1 drops below c_1
# once alpha is under roughly 0.345.
for alpha in (0.1, 0.2, 0.3, 0.35, 0.4, 0.5):
    c = sub_one_weights(alpha, 20).weights
    tail_ok = np.all(np.diff(c[1:]) < 0)
    print(f"alpha={alpha:4}: c0-c1={c[0] - c[1]: .4f}  tail decreasing={tail_ok}")

# %%
# The quadratic form sum_n sum_k c_{n-k} v_k v_n stays nonnegative anyway.
# Check it with the smallest eigenvalue of the symmetrized matrix.
for alpha in (0.1, 0.5, 0.9):
    K = kernel_matrix(alpha, 12)
    lam = np.linalg.eigvalsh(0.5 * (K + K.T)).min()
    v = np.random.default_rng(0).standard_normal(64)
    print(f"alpha={alpha}: min eig={lam:.4f}  random form={quadratic_form(alpha, v):.4f}")

# %%
# Super-one weights are (k+1)^(2-gamma) - k^(2-gamma). They start at 1 and
# decrease.
print(super_one_weights(1.5, 4).weights)
