import math

import numpy as np
import pytest

from qpuff import mechanism as mech
from qpuff.core import QuantumChannel, basis_state, random_channel, random_state
from qpuff.framework import ExplicitMeasurements, PrivacyBudget, check_qpp, make_qldp_framework


def qldp_orthogonal(d=2, measurements=None):
    states = [basis_state(d, 0), basis_state(d, 1)]
    return make_qldp_framework(states) if measurements is None else make_qldp_framework(states, measurements)


def test_depolarize_endpoints():
    rho = random_state(3, seed=0)
    assert np.allclose(mech.depolarize(3, 0).choi, QuantumChannel.identity(3).choi)
    assert np.allclose(mech.depolarize(3, 1)(rho), np.eye(3) / 3)


@pytest.mark.parametrize("p, top, rest", [(0.5, 1.25, 0.25), (0.25, 1.625, 0.125)])
def test_depolarize_choi_spectrum(p, top, rest):
    w = np.linalg.eigvalsh(mech.depolarize(2, p).choi)
    assert np.allclose(np.sort(w), [rest, rest, rest, top])


def test_K_examples():
    assert mech.compute_K(qldp_orthogonal()) == pytest.approx(1.0)
    f = make_qldp_framework([np.diag([0.75, 0.25]), np.diag([0.25, 0.75])])
    assert mech.compute_Kprime(f) == pytest.approx(0.5)
    half = qldp_orthogonal(measurements=ExplicitMeasurements((np.eye(2) / 2,)))
    assert mech.measurement_factor(half) == pytest.approx(0.5)
    assert mech.compute_K(half) == pytest.approx(0.5)


def test_calibrate_eps_examples():
    plan = mech.calibrate_eps(qldp_orthogonal(), None, math.log(3))
    assert plan.p == pytest.approx(0.5, abs=1e-15)
    assert mech.achievable_eps(0.5, 2, 1.0) == pytest.approx(math.log(3))
    rho = random_state(2, seed=0)
    same = make_qldp_framework({"a": rho, "b": rho})
    assert mech.calibrate_eps(same, None, 0.3).p == 0.0
    assert mech.calibrate_eps(qldp_orthogonal(), None, 0).p == pytest.approx(1.0)


def test_calibrate_delta_examples():
    assert mech.calibrate_p_delta(2, 0.5, 0.0, 0.1) == pytest.approx(0.8)
    assert mech.calibrate_p_delta(2, 0.05, 1.0, 0.1) == 0.0
    assert mech.calibrate_p_delta(2, 1.0, math.log(3), 0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("seed", range(5))
def test_calibrated_mechanisms_pass_check(seed):
    rng = np.random.default_rng(seed)
    f = make_qldp_framework([random_state(2, seed=rng) for _ in range(3)])
    pre = random_channel(2, seed=rng)
    eps = float(rng.uniform(0.1, 2))
    plan = mech.calibrate_eps(f, pre, eps)
    assert check_qpp(f, plan.mechanism(pre), PrivacyBudget(eps, 0)).holds
    budget = PrivacyBudget(eps, float(rng.uniform(0, 0.2)))
    plan = mech.calibrate_eps_delta(f, pre, budget)
    assert check_qpp(f, plan.mechanism(pre), budget).holds


def test_tighten_finds_boundary():
    rng = np.random.default_rng(3)
    f = make_qldp_framework([random_state(2, seed=rng) for _ in range(2)])
    budget = PrivacyBudget(0.4, 0.05)
    loose = mech.calibrate_eps_delta(f, None, budget)
    tight = mech.tighten(f, None, budget, loose)
    assert tight.p <= loose.p + 1e-12
    assert check_qpp(f, tight.mechanism(), budget).holds
    assert not check_qpp(f, mech.depolarize(2, max(0.0, tight.p - 1e-4)), budget).holds


def test_classical_kernels():
    ident = QuantumChannel.identity(3)
    povm = mech.computational_povm(3)
    assert np.allclose(mech.classical_pp_mechanism(ident, ident, povm), np.eye(3))
    p = 0.3
    k = mech.classical_pp_mechanism(mech.depolarize(3, p), None, povm)
    assert np.allclose(k, mech.randomized_response_kernel(3, p))
    assert k[0, 0] == pytest.approx(1 - p + p / 3)
    j = random_channel(3, 2, seed=1)
    k = mech.classical_pp_mechanism(ident, j, mech.computational_povm(2))
    assert np.allclose(k.sum(axis=1), 1)


def test_plan_validation():
    with pytest.raises(Exception):
        mech.depolarize(2, 1.5)
    with pytest.raises(Exception):
        mech.calibrate_eps(qldp_orthogonal(), None, -1)
