# %% [markdown]
# Turning a desired pair force into coil amplitudes.
#
# Two satellites share one frequency. The period-averaged force between them
# is half the dipole force of their amplitude vectors, so asking for a force
# means finding two amplitude vectors whose dipole interaction equals it.

# %%
import numpy as np

from emff import amplitude_pair, dipole_force_shape, psi

rng = np.random.default_rng(7)
r = np.array([1.2, -0.4, 0.3])          # relative position, m
f_star = np.array([0.02, 0.05, -0.01])  # wanted force shape

res = amplitude_pair(r, f_star)
print("branch:", res.branch)
print("c1 =", res.c1)
print("c2 =", res.c2)
print("round trip error:", np.linalg.norm(dipole_force_shape(r, res.c1, res.c2) - f_star))

# %% [markdown]
# The controller never sees c1 and c2 directly. It limits power through psi,
# a smooth function of (r, zeta) that sits above both squared amplitude norms.

# %%
zeta = f_star / (r @ r) ** 2
print("psi           :", psi(r, zeta))
print("max |c|^2     :", max(res.c1 @ res.c1, res.c2 @ res.c2))

# %% [markdown]
# The same holds when the force points along r or is orthogonal to it,
# where the construction switches to its special cases.

# %%
for label, f in [("along r", 0.1 * r), ("against r", -0.1 * r),
                 ("orthogonal", np.array([0.4, 1.2, 0.0]))]:
    res = amplitude_pair(r, f)
    err = np.linalg.norm(dipole_force_shape(r, res.c1, res.c2) - f)
    print(f"{label:10s} branch={res.branch:8s} error={err:.1e} "
          f"psi margin={psi(r, f / (r @ r) ** 2) - max(res.c1 @ res.c1, res.c2 @ res.c2):.3e}")
