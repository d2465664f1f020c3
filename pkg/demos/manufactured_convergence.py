# %% [markdown]
# # Manufactured-solution convergence of the slip solver
#
# `u = (-3 x1^2 + 3 x2^2, 6 x1 x2)` is divergence free, tangent to the bottom
# edge and has zero tangential traction there. With the forcing `F = S(Du)`
# it solves the power-law system with zero pressure for every `p`, so the
# discrete error in the natural distance `|V(D u_h) - V(D u)|^2` can be
# measured directly.

# %%
import numpy as np

from slipstokes.experiments import cubic_stream_forcing, cubic_stream_gradient, cubic_stream_velocity
from slipstokes.orlicz import make_power
from slipstokes.solver import MACGrid, make_problem, solve, strain_arrays
from slipstokes.solver.diagnostics import v_distance

# %%
for p in (1.5, 2.0, 3.0):
    phi = make_power(p)
    errs = []
    for n in (16, 32, 64):
        grid = MACGrid.half_cube(n)
        problem = make_problem(grid, phi, cubic_stream_forcing(phi), cubic_stream_velocity)
        rep = solve(grid, phi, problem=problem)
        z = np.concatenate([rep.state.u1.ravel(), rep.state.u2.ravel()])
        G = cubic_stream_gradient(grid.cell_points())
        errs.append(v_distance(phi, strain_arrays(problem, z), 0.5 * (G + np.swapaxes(G, -1, -2)), grid.cell_area))
    print(f"p={p}: errors", " ".join(f"{e:.3e}" for e in errs), "factors", [round(a / b, 2) for a, b in zip(errs, errs[1:])])

# %% [markdown]
# The same run is available from the command line:
#
#     slipstokes solve --config demos/configs/manufactured_p3.json
