"""Randomized inequality suites for the information-spectrum divergence.

Each suite draws random instances and records every inequality as a
``PropertyCheck`` whose slack is ``rhs - lhs``; a suite passes when all
slacks are at least ``-PROPERTY_SLACK``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import random_channel, random_state
from .divergence import (
    dl_divergence,
    dmax,
    dmax_smooth,
    hockey_stick,
    renyi_petz,
    renyi_sandwiched,
)

PROPERTY_SLACK = 1e-6
SUITES = ("data_processing", "quasi_convexity", "smooth_sandwich", "subadditivity")


@dataclass
class PropertyCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        if self.lhs == -math.inf or self.rhs == math.inf:
            return math.inf
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -PROPERTY_SLACK


@dataclass
class SuiteReport:
    suite: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def min_slack(self) -> float:
        return min((c.slack for c in self.checks), default=math.inf)

    def to_dict(self) -> dict:
        worst = min(self.checks, key=lambda c: c.slack, default=None)
        return {"suite": self.suite, "passed": self.passed, "checks": len(self.checks),
                "min_slack": self.min_slack, "worst": None if worst is None else worst.name}


def _dl(rho, sigma, delta) -> float:
    return dl_divergence(rho, sigma, delta).value


def _states(rng, d, n=2):
    return [random_state(d, seed=rng) for _ in range(n)]


def _data_processing(rng) -> list:
    d = int(rng.integers(2, 4))
    rho, sigma = _states(rng, d)
    n = random_channel(d, int(rng.integers(2, 4)), seed=rng)
    x, y = n(rho), n(sigma)
    delta = float(rng.uniform(0.01, 0.5))
    gamma = float(rng.uniform(1, 3))
    return [
        PropertyCheck("dl", _dl(x, y, delta), _dl(rho, sigma, delta)),
        PropertyCheck("hockey_stick", hockey_stick(x, y, gamma), hockey_stick(rho, sigma, gamma)),
        PropertyCheck("dmax", dmax(x, y).value, dmax(rho, sigma).value),
        PropertyCheck("renyi_petz_2", renyi_petz(x, y, 2), renyi_petz(rho, sigma, 2)),
        PropertyCheck("renyi_sandwiched_2", renyi_sandwiched(x, y, 2), renyi_sandwiched(rho, sigma, 2)),
    ]


def _quasi_convexity(rng) -> list:
    d = int(rng.integers(2, 4))
    k = int(rng.integers(2, 5))
    probs = rng.dirichlet(np.ones(k))
    rhos, sigmas = _states(rng, d, k), _states(rng, d, k)
    mix_r = sum(p * r for p, r in zip(probs, rhos))
    mix_s = sum(p * s for p, s in zip(probs, sigmas))
    delta = float(rng.uniform(0.01, 0.5))
    deltas = rng.uniform(0.01, 0.5, k)
    common = max(_dl(r, s, delta) for r, s in zip(rhos, sigmas))
    general = max(_dl(r, s, float(di)) for r, s, di in zip(rhos, sigmas, deltas))
    return [
        PropertyCheck("common_delta", _dl(mix_r, mix_s, delta), common),
        PropertyCheck("weighted_delta", _dl(mix_r, mix_s, float(probs @ deltas)), general),
    ]


def _smooth_sandwich(rng) -> list:
    d = int(rng.integers(2, 4))
    rho, sigma = _states(rng, d)
    delta = float(rng.uniform(0.01, 0.6))
    dp = 1 - math.sqrt(1 - delta * delta)
    smooth = dmax_smooth(rho, sigma, delta).value
    return [
        PropertyCheck("lower", _dl(rho, sigma, delta), smooth),
        PropertyCheck("upper", smooth, _dl(rho, sigma, dp) - math.log(1 - dp)),
    ]


def _subadditivity(rng) -> list:
    r1, s1, r2, s2 = _states(rng, 2, 4)
    while True:
        d1, d2 = (float(x) for x in rng.uniform(0.005, 0.15, 2))
        if math.sqrt(d1 * (2 - d1)) + math.sqrt(d2 * (2 - d2)) < 1:
            break
    r12, s12 = np.kron(r1, r2), np.kron(s1, s2)
    a1, a2 = _dl(r1, s1, d1), _dl(r2, s2, d2)
    joint = math.sqrt(d1 * (2 - d1)) + math.sqrt(d2 * (2 - d2))
    out = [
        PropertyCheck("smoothed", _dl(r12, s12, joint), a1 + a2 - math.log((1 - d1) * (1 - d2))),
        PropertyCheck("unsmoothed", _dl(r12, s12, 0.0), _dl(r1, s1, 0.0) + _dl(r2, s2, 0.0)),
    ]
    mixed = min(d1 + math.exp(a1) * d2, d2 + math.exp(a2) * d1)
    lhs = _dl(r12, s12, mixed) if mixed < 1 else -math.inf
    out.append(PropertyCheck("state_form", lhs, a1 + a2))
    return out


_SUITES = {
    "data_processing": _data_processing,
    "quasi_convexity": _quasi_convexity,
    "smooth_sandwich": _smooth_sandwich,
    "subadditivity": _subadditivity,
}


def run_suite(suite: str, instances: int = 50, seed: int = 0) -> SuiteReport:
    """Evaluate one suite on ``instances`` random draws seeded by ``seed``."""
    if suite not in _SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    report = SuiteReport(suite)
    for child in np.random.SeedSequence(seed).spawn(instances):
        rng = np.random.default_rng(child)
        for c in _SUITES[suite](rng):
            c.name = f"{suite}.{c.name}"
            report.checks.append(c)
    return report
