import math

import numpy as np
import pytest
from scipy import stats

from qpuff import audit
from qpuff.audit import AuditConfig
from qpuff.core import QuantumChannel, ValidationError, basis_state, random_channel, random_state
from qpuff.framework import PrivacyBudget, check_qpp, make_qldp_framework
from qpuff.mechanism import depolarize


def test_statistic_examples(orthogonal_qubits):
    r0, r1 = orthogonal_qubits
    rho = random_state(2, seed=0)
    assert audit.t_eps(rho, rho, depolarize(2, 0.3), 0) == pytest.approx(0, abs=1e-12)
    assert audit.t_eps(r0, r1, QuantumChannel.identity(2), 0) == pytest.approx(1)
    assert audit.t_eps(r0, r1, depolarize(2, 0.5), 0) == pytest.approx(0.5)


def test_threshold_examples():
    assert audit.threshold_g(PrivacyBudget(0, 0)) == 0
    assert audit.threshold_g(PrivacyBudget(math.log(3), 0.05)) == pytest.approx(0.525)
    assert audit.threshold_g(PrivacyBudget(0, 1)) == 1


def test_statistic_threshold_equivalence():
    """T <= g exactly when the hockey-stick value is at most delta."""
    from qpuff.divergence import hockey_stick
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = random_channel(2, seed=rng)
        r, s = random_state(2, seed=rng), random_state(2, seed=rng)
        eps, delta = float(rng.uniform(0, 2)), float(rng.uniform(0, 0.3))
        g = audit.threshold_g(PrivacyBudget(eps, delta))
        t = audit.t_eps(r, s, a, eps)
        e = hockey_stick(a(r), a(s), math.exp(eps))
        assert (t - g) * (math.exp(eps) + 1) / 2 == pytest.approx(e - delta, abs=1e-10)
        assert t >= audit.t_floor(eps) - 1e-12


def test_sample_count():
    assert audit.sample_count(0.05, 0.1, 2) == 3599321012
    counts = [audit.sample_count(a, 0.1, 2) for a in (0.01, 0.05, 0.1, 0.3)]
    assert all(x > y for x, y in zip(counts, counts[1:]))
    assert audit.sample_count(1.0, 0.1, 2) == 0
    with pytest.raises(ValidationError):
        audit.sample_count(0.05, 1.0, 2)


@pytest.mark.parametrize("beta", [0.01, 0.1, 0.5, 0.9])
def test_noise_tail_is_exact(beta):
    model = audit.noise_model(0.05, beta)
    assert model.tail(0.05) == pytest.approx(beta, rel=1e-9)
    if math.isfinite(model.bound):
        b = model.bound / model.sigma
        direct = 2 * stats.truncnorm.sf(0.05 / model.sigma, -b, b)
        assert direct == pytest.approx(beta, rel=1e-6)


def test_noisy_estimate_coverage():
    rng = np.random.default_rng(0)
    misses = sum(abs(audit.noisy_estimate(0.5, 0.05, 0.1, 2, rng)[0] - 0.5) > 0.05 for _ in range(10_000))
    assert misses / 10_000 <= 0.1 + 3 * math.sqrt(0.09 / 10_000)


def test_noise_vanishes_with_alpha():
    rng = np.random.default_rng(0)
    est, _ = audit.noisy_estimate(0.3, 1e-9, 0.1, 2, rng)
    assert est == pytest.approx(0.3, abs=1e-7)


def test_audit_examples(orthogonal_qubits):
    pairs = [orthogonal_qubits]
    cfg = AuditConfig(PrivacyBudget(math.log(3), 0), pairs, exact=True)
    rep = audit.audit(QuantumChannel.identity(2), cfg)
    assert rep.decision == "reject-H0" and rep.statistic == pytest.approx(1)
    cfg = AuditConfig(PrivacyBudget(0.1, 1.0), pairs, seed=3)
    assert audit.audit(QuantumChannel.identity(2), cfg).accepted
    cfg = AuditConfig(PrivacyBudget(math.log(3), 0), pairs, exact=True)
    assert audit.audit(depolarize(2, 0.5), cfg).accepted


def test_exact_audit_matches_checker():
    rng = np.random.default_rng(5)
    for _ in range(30):
        states = [random_state(2, seed=rng) for _ in range(2)]
        a = random_channel(2, seed=rng).then(depolarize(2, float(rng.uniform(0, 1))))
        b = PrivacyBudget(float(rng.uniform(0, 1.5)), float(rng.uniform(0, 0.2)))
        f = make_qldp_framework(states)
        rep = audit.audit(a, AuditConfig(b, [tuple(states)], exact=True))
        assert rep.accepted == check_qpp(f, a, b).holds


def test_audit_is_deterministic(orthogonal_qubits):
    cfg = AuditConfig(PrivacyBudget(1, 0.1), [orthogonal_qubits], seed=9)
    a = depolarize(2, 0.6)
    assert audit.audit(a, cfg).to_dict() == audit.audit(a, cfg).to_dict()


def test_type1_rate_small_run(orthogonal_qubits):
    cfg = AuditConfig(PrivacyBudget(math.log(3), 0), [orthogonal_qubits], alpha=0.05, beta=0.1, seed=2)
    res = audit.type1_curve(depolarize(2, 0.5), cfg, trials=2000)
    assert res.within_bound
    huge = AuditConfig(PrivacyBudget(math.log(3), 0), [orthogonal_qubits], alpha=5.0, beta=0.1)
    assert audit.type1_curve(depolarize(2, 0.5), huge, trials=200).rate == 0


def test_type1_refuses_violating_channel(orthogonal_qubits):
    cfg = AuditConfig(PrivacyBudget(0.1, 0), [orthogonal_qubits])
    with pytest.raises(ValidationError):
        audit.type1_curve(QuantumChannel.identity(2), cfg, trials=10)


def test_config_validation(orthogonal_qubits):
    with pytest.raises(ValidationError):
        AuditConfig(PrivacyBudget(1, 0), [], alpha=0.05)
    with pytest.raises(ValidationError):
        AuditConfig(PrivacyBudget(1, 0), [orthogonal_qubits], alpha=0)
