"""
Pulse programming of a single device
====================================

A train of identical positive pulses drives the resistance up until the
window closes at the bias-dependent boundary.
"""

import numpy as np

from rramflow import DeviceState, builtin, run_device, extract_rs_series
from rramflow.model import analytical_step, boundary
from rramflow.stimulus import build_characterization, CharacterizationPlan

p = builtin("exp-10k17k")
s0 = DeviceState(16250.0, 10e3, 17e3)

# 1500 pulses of 0.8 V / 100 us, each followed by a 0.5 V read ramp
plan = CharacterizationPlan("pulse_count", (0.8,), (100e-6,), n_pulses=1500)
w = build_characterization(plan, 1e-6)[0].waveform
tr = run_device(p, s0, w, t_s=1e-6, decimate=1000)
reads = np.array(extract_rs_series(tr))

for k in (1, 10, 100, 500, 1000, 1500):
    print(f"after pulse {k:5d}: RS = {reads[k - 1, 1]:9.2f} ohm")

# the positive boundary at 0.8 V does not depend on the bias for this set
print("boundary at +0.8 V:", boundary(p, 0.8))

# a single long pulse has a closed form; compare with the pulse-by-pulse run
print("closed form after 150 ms at 0.8 V:", analytical_step(p, 16250.0, 0.8, 1500 * 100e-6))
