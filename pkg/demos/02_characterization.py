"""
Pulse-width and amplitude characterization
==========================================

Longer or stronger pulses move the state further per pulse. Negative pulses
move it down, and on this parameter set they do so faster than positive ones
once the device sits high in its window.
"""

from rramflow import DeviceState, builtin, run_device, extract_rs_series
from rramflow.stimulus import CharacterizationPlan, build_characterization

p = builtin("exp-10k17k")


def sweep(plan, R0):
    out = {}
    for s in build_characterization(plan, 1e-6):
        reads = extract_rs_series(run_device(p, DeviceState(R0, 10e3, 17e3), s.waveform, 1e-6))
        out[s.label] = [rs for _, rs in reads]
    return out


widths = sweep(CharacterizationPlan("pulse_width", (0.8,), (1e-6, 10e-6, 100e-6), n_pulses=50), 12e3)
for label, rs in widths.items():
    print(f"{label:>16}: RS after 50 pulses = {rs[-1]:9.2f} ohm")

amps = sweep(CharacterizationPlan("amplitude", (0.6, 0.7, 0.8, -0.6, -0.7, -0.8), (100e-6,),
                                  n_pulses=50, initial_read=True), 14e3)
for label, rs in amps.items():
    print(f"{label:>10}: first-pulse change {rs[1] - rs[0]:+9.2f} ohm, after 50 pulses {rs[-1]:9.2f} ohm")
