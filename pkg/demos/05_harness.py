"""Driving experiments through flat config files, as the CLI does.

Run with ``python3 demos/05_harness.py``.  The same runs from a shell:

    complextubes volume-check --set delta=0.1 --set samples=1e6 --out out/vol
    complextubes sweep --config sweep.txt --out out/sweep
"""
import json
import tempfile
from pathlib import Path

from complextubes import harness

out = Path(tempfile.mkdtemp(prefix="complextubes-"))

# %% One command
cfg = harness.parse_config("theta = pi/4\ndelta = 0.1\nsamples = 1000000\nseed = 42\n")
status = harness.run_command("volume-check", cfg, out / "vol")
print("exit", status)
print(json.loads((out / "vol" / "report.json").read_text())["result"])

# %% A sweep: one subdirectory per cell plus a summary table
text = """
command = bound-verify
theorem = t42
spacing_kind = exact-H0
axis.delta = 1/16, 1/32
"""
harness.run_command("sweep", harness.parse_config(text), out / "sweep")
print((out / "sweep" / "data.csv").read_text())
print("outputs in", out)
