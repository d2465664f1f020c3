# %% [markdown]
# # Gradient integrability near a re-entrant corner
#
# The stream function `w = r^lam sin(lam theta)` with `lam = pi / beta` gives a
# slip velocity in the sector `0 < theta < beta`. For `beta > pi / 2` its
# gradient blows up at the tip, and `|grad u|^q` is integrable only below a
# threshold exponent. This script tabulates that threshold and watches the
# truncated integrals as the cut-off radius halves.

# %%
import math

from slipstokes.experiments import blowup_exponent, corner_sequence, lq_norm_exact, lq_threshold

beta = 3 * math.pi / 4
print("threshold:", lq_threshold(beta))

# %% [markdown]
# Below the threshold the increments shrink geometrically and the sequence has
# a limit; above it the increments grow with the predicted exponent.

# %%
for q in (2.0, 2.9, 3.1, 4.0):
    seq = corner_sequence(beta, q, levels=30)
    tail = seq.limit[-1] if seq.converges else float("inf")
    print(
        f"q={q:4.1f} converges={seq.converges!s:5} fitted={seq.fit.exponent:+.5f} "
        f"expected={blowup_exponent(beta, q):+.5f} limit~{tail:.6g}"
    )

# %% [markdown]
# The quadrature agrees with the closed form of the radial integral.

# %%
print(corner_sequence(beta, 2.0, levels=10).values[-1], lq_norm_exact(beta, 2.0, 2.0**-10))
