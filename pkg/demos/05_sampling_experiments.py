"""Desk-scale sampling-complexity experiments through the drivers.

Reproduces the shape of the published experiments at sizes that run in
seconds: how the required sample count moves with the budget, the error
target, and the player count, plus the error-distribution experiment.
Writes CSVs next to this script unless SHAPSIM_OUTPUT_DIR is set.
"""

import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
OUT = HERE / "out"
OUT.mkdir(exist_ok=True)


def drive(*args):
    cmd = [sys.executable, "-m", "shapsim.cli", *map(str, args)]
    print("$", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


# Exact values for the synthetic game the experiments use.
drive("shapley", "--game", "lb", "--n", "10", "--out", OUT / "lb10_values.csv")

# Required samples versus budget and error target (compare against the
# bracket [n*C/(10*eps), gamma*C/eps]).
drive("min-samples", "--game", "lb", "--n", "10", "--eps", "0.05",
      "--sweep", "C=1,2,4", "--out", OUT / "min_samples_vs_budget.csv")
drive("min-samples", "--game", "lb", "--n", "10", "--budget", "2",
      "--sweep", "eps=0.1,0.05,0.025", "--out", OUT / "min_samples_vs_eps.csv")

# Versus player count: roughly linear for the synthetic game whose ratio
# grows with n, flat for a synergy game with a fixed honest neighborhood.
drive("min-samples", "--game", "lb", "--eps", "0.05", "--budget", "2",
      "--sweep", "n=8,12,16", "--out", OUT / "min_samples_vs_n_lb.csv")

# Collaboration reconstruction: constant ratio, so the count is n-free.
data = HERE.parent / "data" / "collab_reconstruction.hg"
drive("min-samples", "--hypergraph", data, "--honest", "0", "--padding", "6",
      "--eps", "0.1", "--budget", "2", "--out", OUT / "min_samples_collab.csv")

# Error-distribution experiment: many runs at the known-budget sample count,
# then the empirical distribution of the achieved multiplicative error.
drive("cdf", "--game", "lb", "--n", "8", "--protocol", "seq", "--adversary", "dp",
      "--stopping", "known", "--budget", "2", "--eps", "0.2", "--delta", "0.1",
      "--M", "300", "--seed", "12", "--out", OUT / "cdf_lb8.csv")

# One raw run record with full per-sample bookkeeping.
drive("simulate", "--game", "lb", "--n", "8", "--protocol", "seq",
      "--adversary", "dp", "--budget", "2", "--R", "200", "--seed", "13",
      "--out", OUT / "run_record.csv")

print(f"\nwrote CSVs under {OUT}")
for path in sorted(OUT.glob("*.csv")):
    first_rows = path.read_text().splitlines()
    data_rows = [r for r in first_rows if not r.startswith("#")]
    print(f"  {path.name}: {len(data_rows) - 1} rows")
