"""Jets of curves and how a map pushes them forward.

Run with ``python3 notebooks/01_jets_and_chain_rule.py``.
"""
# %% [markdown]
# A point of T^kM in a chart is a base point together with the scaled
# derivatives xi_i = gamma^(i)(0)/i! of a curve through it.  Pushing the jet
# through a map g is a sum over integer partitions of each order.

# %%
from fractions import Fraction

from tkbundle import (
    MapSpec, NaturalJet, compose_jet, derivative_tower, faa_di_bruno_coefficient,
    partitions_of_order,
)
from tkbundle.oracle import poly_compose_oracle

for k in range(1, 6):
    terms = [(p.parts, faa_di_bruno_coefficient(p)) for p in partitions_of_order(k)]
    print(f"k={k}: {terms}  total {sum(c for _, c in terms)}")

# %% [markdown]
# The totals are the Bell numbers.  Now push the jet of t -> t + t^2 through
# u -> u^2 and compare with brute-force expansion of the composite.

# %%
g = MapSpec.parse(["x1^2"], 1, backend="exact")
jet = NaturalJet((0,), [(1,), (1,), (0,)])
image = compose_jet(derivative_tower(g, jet.base, 3), jet)
print("raw derivatives:", [image.raw(i)[0] for i in range(4)])
print("oracle:         ", [d[0] for d in poly_compose_oracle(g, jet.curve(), 3)])

# %% [markdown]
# A two-dimensional example with rational data stays exact.

# %%
h = MapSpec.parse(["x1^2*x2 - x2", "x1 + x2^3/2"], 2, backend="exact")
j = NaturalJet((Fraction(1, 2), 1), [(1, 0), (0, 1), (1, 1)])
print(compose_jet(derivative_tower(h, j.base, 3), j))
