"""
Scenario files and the command line
===================================

The same machinery behind the ``agechemostat`` command: write a scenario
file, run it, and read the artifacts back.  The manifest alone is enough to
repeat the run.
"""

import tempfile
from pathlib import Path

from agechemostat.cli import main
from agechemostat.flow import read_timeseries

SCENARIO = """
[model]
kinetics = monod
mu_max = 1
K_S = 1
S_in = 2
beta = 0.1
k = 1
q = 1

[initial]
type = exponential
C = 1
S0 = 1

[dilution]
schedule = 0:0.5, 2:0.2

[run]
horizon = 4

[numerics]
dt = 0.01

[output]
snapshot_times = 0, 2, 4
"""

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "scenario.ini"
    cfg.write_text(SCENARIO)

    main(["simulate", "--config", str(cfg), "--out", str(tmp / "run")])
    print(sorted(p.name for p in (tmp / "run").iterdir()))

    ts = read_timeseries(tmp / "run" / "timeseries.csv")
    print(f"S(4) = {ts['S'][-1]:.6f}, N(4) = {ts['N'][-1]:.6f}")

    # rerun from the manifest and compare byte for byte
    main(["simulate", "--config", str(tmp / "run" / "manifest.ini"), "--out", str(tmp / "again")])
    same = ((tmp / "run" / "timeseries.csv").read_bytes()
            == (tmp / "again" / "timeseries.csv").read_bytes())
    print("manifest rerun identical:", same)

    main(["oracle-compare", "--config", str(cfg), "--out", str(tmp / "run")])
    main(["refine", "--config", str(cfg), "--out", str(tmp / "run"), "--levels", "3"])
