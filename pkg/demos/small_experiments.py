"""Miniature type-I error and power studies.

The full grids (1000 datasets x 500 bootstrap samples per cell) take hours;
these runs use a handful of datasets so the whole script finishes in a few
minutes on one core. Rates at this scale are only rough.

Run: python3 demos/small_experiments.py [workers]
"""

import sys

from hermite_gof import ExperimentConfig, run_power_experiment, run_type1_experiment
from hermite_gof.harness import format_table

workers = int(sys.argv[1]) if len(sys.argv) > 1 else 1

# Type-I error: data drawn from the null model itself
type1 = ExperimentConfig(
    mode="type1",
    specs=[(1.0, 0.8, 0.50, 0.50, 0.0), (1.5, 1.0, 0.75, 0.25, 0.0)],
    n=[50],
    B=99,
    reps=40,
    weights=[(0, 0), (1, 1)],
    master_seed=7,
    workers=workers,
)
tbl = run_type1_experiment(type1)
print("Type-I error (rejection fraction)")
print(format_table(tbl))
print(f"runtime {tbl.metadata['runtime_seconds']:.0f} s\n")

# Power: data drawn from alternatives outside the Hermite family
power = ExperimentConfig(
    mode="power",
    specs=["BB(1;0.61,0.03,0.02)", "BLS(0.25,0.15,0.10)", "BNB(1;0.92,0.97,0.01)"],
    n=[50],
    B=99,
    reps=40,
    weights=[(1, 1)],
    master_seed=7,
    workers=workers,
)
tbl = run_power_experiment(power)
print("Power (rejection fraction)")
print(format_table(tbl))
print(f"runtime {tbl.metadata['runtime_seconds']:.0f} s")
