"""
Node conditionals of the exponential SQR
========================================

Each variable, given the others, follows a two-parameter family
``exp(eta1 x + eta2 sqrt(x) - A(eta1, eta2))``.  This script compares the
closed-form log partition with brute-force quadrature and shows how the
sqrt term bends the ordinary exponential density.
"""

import numpy as np

from sqrgm.family import (
    FamilyTag,
    node_log_partition,
    node_log_partition_grad,
    node_log_partition_quadrature,
    node_mode,
    sample_node_conditional,
)

EXP = FamilyTag.EXPONENTIAL

# eta2 = 0 is the plain exponential with rate -eta1; eta2 > 0 pushes the
# mode away from zero, eta2 < 0 piles mass near zero
for eta2 in (-2.0, 0.0, 2.0, 6.0):
    a = node_log_partition(EXP, (-1.0, eta2))
    q = node_log_partition_quadrature(EXP, (-1.0, eta2))
    print(f"eta2={eta2:+.1f}  A={a:.12f}  quadrature={q:.12f}  mode={node_mode(EXP, (-1.0, eta2)):.3f}")

# eta1 = 0 is allowed when eta2 < 0: the density decays like exp(-c sqrt(x))
print("A(0, -1) =", node_log_partition(EXP, (0.0, -1.0)), "(log 2)")

# Slice sampling: each step draws a level under the log density and then a
# uniform point from the exact interval where the density exceeds it
rng = np.random.default_rng(0)
x = sample_node_conditional(EXP, (-1.0, 2.0), slice_steps=10, rng=rng, size=20000)
# the gradient of A gives the moments (E[x], E[sqrt x])
e_x, e_sqrt = node_log_partition_grad(EXP, (-1.0, 2.0))
print(f"E[x]: sample {x.mean():.4f}  dA/deta1 {e_x:.4f}")
print(f"E[sqrt x]: sample {np.sqrt(x).mean():.4f}  dA/deta2 {e_sqrt:.4f}")

# Poisson node conditionals are normalizable for any (eta1, eta2)
for eta1 in (-2.0, 0.0, 2.0):
    print(f"Poisson A({eta1:+.0f}, 2) = {node_log_partition(FamilyTag.POISSON, (eta1, 2.0)):.6f}")
