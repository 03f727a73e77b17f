"""Isometries of the round sphere lift to fibre-linear maps of T^kM.

Run with ``python3 notebooks/03_sphere_rotation.py``.
"""
# %% [markdown]
# The round metric in a stereographic chart, its Levi-Civita connection,
# and a rotation about the first axis written in the same chart.

# %%
from tkbundle import (
    MapSpec, MetricField, MorphismScenario, check_fibre_linearity, lift_connection,
    levi_civita, lifted_metric_residual,
)
from tkbundle.sampling import make_rng

box = [(-1, 1), (-1, 1)]
e = "4/(1+x1^2+x2^2)^2"
metric = MetricField.from_exprs([[e, "0"], ["0", e]], 2, [(-3, 3), (-3, 3)])
den = "((4/5-3/5*x2)^2+(3/5)^2*x1^2)"
rot = MapSpec.parse([f"x1/{den}", f"((7/25)*x2+(12/25)*(1-x1^2-x2^2))/{den}"], 2, box)

# %% [markdown]
# In lifted coordinates the rotation acts as (x, z) -> (g(x), dg z) on every
# block and preserves the direct-sum metric.

# %%
for k in (1, 2, 3):
    C = lift_connection(levi_civita(metric), k)
    print(check_fibre_linearity(MorphismScenario(rot, C, C, k), 30, make_rng(k), 1e-7).line())
print(lifted_metric_residual(metric, rot, 3, 30, make_rng(9)).line())

# %% [markdown]
# A dilation is not an isometry; the order-1 gate says so and stops.

# %%
scale = MapSpec.parse(["2*x1", "2*x2"], 2, [(-0.5, 0.5), (-0.5, 0.5)])
print(lifted_metric_residual(metric, scale, 3, 10, make_rng(1)).line())
