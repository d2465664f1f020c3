# %% [markdown]
# # Mean-oscillation seminorms on grids
#
# A few hand-checkable values: the linear field `x1` has mean oscillation
# `1/4` on the unit square; a jump has oscillation `1`; a constant shear on
# the slip edge is seen by the boundary traction term but not by the BMO part.

# %%
import numpy as np

from slipstokes.fields import CellGrid
from slipstokes.oscillation import Weight, bmo_seminorm, dyadic_family, flat_bottom_samples, overlapping_family, overline_bmo

grid = CellGrid.unit_square(32)
x1 = grid.centers()[..., 0]
print("x1:", bmo_seminorm(x1, dyadic_family(grid)).value)
print("jump:", bmo_seminorm(np.sign(x1 - 0.5), dyadic_family(grid)).value)

# %%
half = CellGrid.half_cube(32)
shear = np.zeros((32, 16, 2, 2))
shear[..., 0, 1] = shear[..., 1, 0] = 1.0
rep = overline_bmo(shear, overlapping_family(half), Weight(), flat_bottom_samples(half))
print(rep.parts)

# %% [markdown]
# Hoelder seminorms via the Campanato characterization: `|x|^(1/2)` is stable
# under refinement with `omega(r) = r^(1/2)`, while `|x|^(1/4)` grows.

# %%
for n in (16, 32, 64, 128):
    g = CellGrid.unit_square(n)
    r = np.linalg.norm(g.centers(), axis=-1)
    fam = dyadic_family(g)
    w = Weight.power(0.5)
    print(n, bmo_seminorm(r**0.5, fam, w).value, bmo_seminorm(r**0.25, fam, w).value)
