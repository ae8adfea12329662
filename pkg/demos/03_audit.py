"""Audit a black-box channel against a claimed budget.

The exact audit evaluates the statistic directly and agrees with the checker.
The noisy audit simulates an estimator with additive error alpha that fails
with probability beta; its threshold is widened by alpha, so an honest
channel is rejected at most a beta fraction of the time.
"""

import math

from qpuff import audit
from qpuff.audit import AuditConfig
from qpuff.core import basis_state
from qpuff.framework import PrivacyBudget
from qpuff.mechanism import depolarize

pairs = [(basis_state(2, 0), basis_state(2, 1))]
claim = PrivacyBudget(math.log(3), 0)

for p in (0.5, 0.3):
    rep = audit.audit(depolarize(2, p), AuditConfig(claim, pairs, exact=True))
    print(f"p={p}: exact statistic {rep.statistic:.4f} vs threshold {rep.threshold:.4f} -> {rep.decision}")

cfg = AuditConfig(claim, pairs, alpha=0.05, beta=0.1, seed=1)
rep = audit.audit(depolarize(2, 0.5), cfg)
print(f"\nnoisy audit: estimate {rep.statistic:.4f}, threshold {rep.threshold:.4f}, "
      f"modelled samples {rep.sample_budget:.3e} -> {rep.decision}")

res = audit.type1_curve(depolarize(2, 0.5), cfg, trials=5000)
print(f"type-I rate over {res.trials} trials: {res.rate:.4f} (beta = {res.beta})")
