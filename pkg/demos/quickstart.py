"""Short GRIM-CountBased vs CountBased comparison printed as a table.

    python3 demos/quickstart.py [n_epochs]
"""
import sys

from grimlab import ExperimentConfig, run_experiment
from grimlab.stats import smooth

n = int(sys.argv[1]) if len(sys.argv) > 1 else 150
for cfg in (ExperimentConfig(n_epochs=n, start_exploration=n // 3),
            ExperimentConfig(n_epochs=n, start_exploration=n // 3, wrap_grimgep=True)):
    res = run_experiment(cfg)
    succ = smooth([m.mean_success for m in res.metrics], 25)
    last = res.metrics[-1]
    print(f"{cfg.name():<18} success(smoothed)={succ[-1]:.3f} cum tv_on={last.cum_frac_tv_on:.3f} "
          f"cum object={last.cum_frac_object_room:.3f} ({res.wall_clock:.0f}s)")
