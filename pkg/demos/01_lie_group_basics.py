# %% [markdown]
# # Poses, twists and the screw exponential
#
# A pose is a 4x4 homogeneous matrix, a twist is ``(omega, v)`` with the
# angular part first. Nothing here allocates anything fancier than numpy arrays.

# %%
import numpy as np

from se3sync import liegroup as lg
from se3sync.oracles import series_exp

rng = np.random.default_rng(0)
xi = np.array([0.1, -0.4, 0.3, 1.0, 0.0, -2.0])
print(lg.wedge(xi))
print(lg.vee(lg.wedge(xi)))

# %% [markdown]
# The adjoint moves twists between frames: ``X xi^ X^-1 = (Ad_X xi)^``.

# %%
u = rng.normal(size=3)
X = lg.pose(lg.rot_angle_axis(1.1, u / np.linalg.norm(u)), [0.5, -1.0, 2.0])
lhs = X @ lg.wedge(xi) @ lg.inverse(X)
print("conjugation residual", np.abs(lhs - lg.wedge(lg.adjoint(X) @ xi)).max())
print("ad_xi xi =", lg.ad_small(xi) @ xi)

# %% [markdown]
# ``screw_exp(theta, u_c)`` is the closed form of ``exp(theta u_c^)`` for a
# unit rotation axis. Compare it with a brute-force power series.

# %%
u_c = np.r_[np.array([0.11, 0.99, 0.04]) / np.linalg.norm([0.11, 0.99, 0.04]), -3.06, 0.20, 3.32]
for theta in (1e-7, 0.3 * np.pi, np.pi):
    T = lg.screw_exp(theta, u_c)
    err = np.abs(T - series_exp(theta * lg.wedge(u_c))).max()
    print(f"theta = {theta:.3g}: max |closed form - series| = {err:.1e}")

# %% [markdown]
# Integrators drift off SO(3); ``renormalize`` snaps the rotation block back
# with a polar projection and leaves the translation alone.

# %%
Y = X.copy()
Y[:3, :3] += 1e-4 * rng.normal(size=(3, 3))
Z = lg.renormalize(Y)
print(lg.is_rotation(Y[:3, :3]), lg.is_rotation(Z[:3, :3]), np.abs(Z - X).max())
