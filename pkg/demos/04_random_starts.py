# %% [markdown]
# # Random starts
#
# Haar-random attitudes, positions uniform in a 10 m box, zero twists. Each
# run has its own seed, so any single run can be replayed with
# ``se3sync run --seed S``.

# %%
import warnings

from se3sync import fig2_config
from se3sync.errors import SynergyWarning
from se3sync.montecarlo import MC_H, montecarlo

warnings.simplefilter("ignore", SynergyWarning)

rows, agg = montecarlo(fig2_config(t_end=60.0, h=MC_H), runs=10, seed=0, workers=1)
for r in rows:
    print(f"seed {r.seed:10d}  {r.status:13s} t = {r.t_final:5.1f} s  jumps {r.jumps:3d} / budget {r.budget}")
print(f"convergence rate {agg.rate:.0%}, max jumps {agg.max_jumps}, violations {agg.violations}")

# %% [markdown]
# Jumps are what rescue runs that start near a bad equilibrium; every jump
# must lower Vbar by at least k_X delta. The smallest margin over the batch:

# %%
print(f"min (decrease - k_X delta) = {agg.min_jump_slack:.3g}")
