import pytest

from qpuff import properties


@pytest.mark.parametrize("suite", properties.SUITES)
def test_suite_passes(suite):
    rep = properties.run_suite(suite, instances=10, seed=3)
    assert rep.passed, rep.to_dict()
    assert rep.checks


def test_unknown_suite():
    with pytest.raises(ValueError):
        properties.run_suite("chain_rule")


def test_check_slack_semantics():
    c = properties.PropertyCheck("x", 1.0, 1.0 - 2e-6)
    assert not c.holds
    assert properties.PropertyCheck("y", float("-inf"), 0.0).holds
