"""
Verifying resistance ranges for a memristive NAND gate
======================================================

Three memristors set the gate behaviour. The flow sweeps each one across its
proposed range, collects the intervals that keep every logic check passing,
and compares them with the nominal range the devices can actually hold.
"""

from rramflow.config import example_path, load_design, read_config
from rramflow.designflow import nand_output, run_workflow

for name in ("nand_pass.ini", "nand_fail.ini"):
    cfg = load_design(read_config(example_path(name)), example_path(""))
    print(f"--- {name}")
    print(f"output at (0 V, 0 V): {nand_output(cfg.gate, 0.0, 0.0):.3f} V, "
          f"at (5 V, 5 V): {nand_output(cfg.gate, 5.0, 5.0):.3f} V")
    print(run_workflow(cfg).to_text())
