"""Make a qubit channel private, then confirm it.

Two orthogonal input states are the worst case for local privacy: any
measurement in the computational basis tells them apart. Depolarizing noise
blurs them; we calibrate the noise level for a target budget and verify the
result with the checker, which reports the smallest achievable eps and delta.
"""

import math

from qpuff.core import basis_state
from qpuff.framework import PrivacyBudget, check_qpp, make_qldp_framework
from qpuff.mechanism import calibrate_eps

framework = make_qldp_framework([basis_state(2, 0), basis_state(2, 1)])

for eps in (0.5, math.log(3), 2.0):
    plan = calibrate_eps(framework, None, eps)
    report = check_qpp(framework, plan.mechanism(), PrivacyBudget(eps, 0))
    print(f"target eps={eps:.3f}: p={plan.p:.4f}, certified eps={report.min_eps:.4f}, holds={report.holds}")

# a little less noise than calibrated breaks the guarantee
weaker = calibrate_eps(framework, None, math.log(3) + 0.2).mechanism()
report = check_qpp(framework, weaker, PrivacyBudget(math.log(3), 0))
print(f"\nunder-noised channel at eps=ln 3: holds={report.holds}, needs delta >= {report.min_delta:.4f}")
