"""
How the rate-splitting precoder distributes power
=================================================

Look at the share of transmit power that goes to the common stream and
to each private stream, and count the private streams that carry more
than one percent of the power.
"""

import numpy as np

from rsmiso import SweepSpec, active_stream_count, run_sweep

spec = SweepSpec(T_dl=2, n_trials=10, powers_db=(0, 10, 20, 30, 40), methods=("awamse_rs",))
agg = run_sweep(spec)

###############################################################################
# Mean power fractions, common stream first.
labels = ["Com"] + [f"UE{k + 1}" for k in range(spec.K)]
print("P_dl [dB] " + "".join(f"{s:>7s}" for s in labels))
for i, p in enumerate(spec.powers_db):
    print(f"{p:9.0f} " + "".join(f"{f:7.3f}" for f in agg.mean_power_alloc["awamse_rs"][i]))

###############################################################################
# At high power the number of active private streams tracks the pilot length.
fr = agg.power_fractions("awamse_rs", 40.0)
counts = np.array([active_stream_count(f) for f in fr])
print("active private streams at 40 dB:", np.bincount(counts, minlength=spec.K + 1))
