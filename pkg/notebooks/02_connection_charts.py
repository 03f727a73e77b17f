"""Vector bundle charts on T^kM induced by a connection.

Run with ``python3 notebooks/02_connection_charts.py``.
"""
# %% [markdown]
# A linear connection lifts to components M^1..M^k.  They turn the natural
# jet coordinates into fibre coordinates z^i, and the change of chart then
# acts on every block by the same Jacobian.

# %%
from fractions import Fraction

import numpy as np

from tkbundle import (
    Christoffel, MapSpec, NaturalJet, detrivialize, lift_connection, transition_check,
    transport_christoffel, trivialize,
)
from tkbundle.sampling import make_rng

c = Fraction(2)
C = lift_connection(Christoffel(1, lambda x: np.array([[[c]]], dtype=object), symmetric=True), 3)
jet = NaturalJet.from_raw([(0,), (1,), (2,), (0,)])
L = trivialize(C, jet)
print("fibre coordinates:", L.fibre)
print("recovered jet:    ", detrivialize(C, L) == jet)

# %% [markdown]
# Chart change x -> x^3 + x on [-1, 1] with the flat connection carried
# along.  The residual against the block-diagonal form is at rounding level.

# %%
phi = MapSpec.parse(["x1^3 + x1"], 1, [(-1, 1)])
flat = Christoffel.flat(1)
for k in range(1, 5):
    rec = transition_check(lift_connection(flat, k), lift_connection(transport_christoffel(flat, phi), k),
                           phi, k, 50, make_rng(k))
    print(rec.line())

# %% [markdown]
# Using the flat connection on both sides ignores the chart change, and the
# lifted transition stops being linear.

# %%
rec = transition_check(lift_connection(flat, 3), lift_connection(flat, 3), phi, 3, 50, make_rng(0))
print(rec.line())
