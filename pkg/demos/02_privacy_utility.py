"""How much usefulness does privacy cost?

Utility is one minus half the diamond distance between the identity and the
best recovery applied after the mechanism. For depolarization there is a
closed form; the SDP agrees with it. The frontier table shows the utility of
calibrated depolarization as the budget grows, for several distinguishability
levels K.
"""

import numpy as np

from qpuff import tradeoff
from qpuff.mechanism import depolarize

print(" d    p   utility(SDP)  closed form")
for d in (2, 3):
    for p in (0.0, 0.25, 0.5, 1.0):
        got = tradeoff.utility(depolarize(d, p)).utility
        print(f" {d}  {p:4.2f}   {got:.6f}     {tradeoff.depolarization_utility(d, p):.6f}")

print()
rows = tradeoff.frontier(np.linspace(0.0, 3.0, 7), ks=(0.5, 1.0))
print(tradeoff.frontier_csv(rows))
