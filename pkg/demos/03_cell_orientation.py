"""
Which way round should the transistor go?
=========================================

A 1T1R cell biased in both directions. With the memristor on the source
side the gate drive collapses in one polarity; the report recommends the
orientation whose weaker direction is stronger.
"""

from rramflow.primitives import MosfetParams, Ratings, compare_orientations, soac_check

rated = Ratings(v_gs_max=5.5, v_ds_max=5.5, v_gd_max=5.5, v_db_max=5.5)
pmos = MosfetParams("pmos", 0.7, 1.11e-3, v_th_rev=3.5, ratings=rated)

rep = compare_orientations(pmos, 1000.0, 5.0)
print(rep.to_csv())
for o in ("source_to_rram", "drain_to_rram"):
    fwd, rev = rep.currents(o)
    print(f"{o:>15}: |forward| {fwd * 1e3:.4f} mA, |reverse| {rev * 1e3:.4f} mA")
print("recommended:", rep.recommended.value)
print("largest single current:", rep.max_current_winner.value)
