"""
Reads, sneak paths and IR drop in a crossbar
============================================
"""

import numpy as np

from rramflow.crossbar import (ArrayCell, ArrayState, CrossbarSpec, LineGeometry, build, ir_drop_report,
                               read_cell)
from rramflow.model import builtin
from rramflow.primitives import MosfetParams, Ratings

# a passive 2x2 array with floating unselected lines: the three other cells
# form a sneak path in parallel with the selected one
net = build(CrossbarSpec(2, 2, cell=ArrayCell.PASSIVE))
res = read_cell(net, ArrayState.uniform(2, 2, 10e3, 1e3, 1e5), 0, 0, 0.5)
print(f"passive 2x2: estimate {res.RS_estimate:.1f} ohm for a 10 kohm cell ({res.error_pct:+.1f} %)")

# the same read through selector transistors
rated = Ratings(5.5, 5.5, 5.5, 5.5)
nfet = MosfetParams("nmos", 0.7, 1e-3, ratings=rated)
spec = CrossbarSpec(16, 16, device=builtin("exp-10k17k"), fet=nfet, rho_sq=0.08,
                    bit=LineGeometry(60), word=LineGeometry(60), sel=LineGeometry(13))
state = ArrayState(np.random.default_rng(1).uniform(10e3, 17e3, (16, 16)), 10e3, 17e3)
net = build(spec)
for r, c in ((0, 0), (15, 15)):
    res = read_cell(net, state, r, c, 0.5)
    print(f"1T1R 16x16 cell ({r},{c}): true {res.R_true:.1f}, estimate {res.RS_estimate:.1f} ({res.error_pct:+.3f} %)")

# worst-case delivered voltage with every cell at a low 1 kohm
rep = ir_drop_report(spec, 1000.0, 1.5)
print(f"IR drop: worst cell {rep.worst_cell} receives {rep.min_delivered:.4f} V of 1.5 V")
for rho in (0.02, 0.08, 0.32):
    s = CrossbarSpec(16, 16, fet=nfet, rho_sq=rho, bit=LineGeometry(60), word=LineGeometry(60),
                     sel=LineGeometry(13))
    print(f"  rho_sq {rho:4.2f} ohm/sq -> {ir_drop_report(s, 1000.0, 1.5).min_delivered:.4f} V")
