import numpy as np
import pytest

from qpuff import conic
from qpuff.core import QpuffError, random_state


def test_realify_examples(rng):
    assert np.allclose(conic.realify(np.array([[2.0]])), np.diag([2.0, 2.0]))
    assert np.allclose(conic.realify(np.eye(2)), np.eye(4))
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    h = (g + g.conj().T) / 2
    w = np.linalg.eigvalsh(h)
    assert np.allclose(np.sort(np.linalg.eigvalsh(conic.realify(h))), np.sort(np.r_[w, w]))


def test_scalar_lower_bound():
    prog = conic.ConicProgram()
    lam = prog.scalar("lam")
    prog.ge(lam, 3, name="floor")
    prog.minimize(lam)
    res = conic.solve(prog).require()
    assert res.primal == pytest.approx(3, abs=1e-7)
    assert res.value(lam) == pytest.approx(3, abs=1e-7)
    # the multiplier of the only active constraint is the objective slope
    assert float(res.duals["floor"][0]) == pytest.approx(1, abs=1e-6)


def test_infeasible_and_unbounded():
    prog = conic.ConicProgram()
    t = prog.scalar("t", nonneg=True)
    prog.le(t, -1)
    prog.minimize(t)
    assert conic.solve(prog).status == "infeasible"

    prog = conic.ConicProgram()
    t = prog.scalar("t")
    prog.minimize(t)
    assert conic.solve(prog).status == "unbounded"


def test_require_raises_on_failure():
    prog = conic.ConicProgram()
    t = prog.scalar("t", nonneg=True)
    prog.le(t, -1)
    prog.minimize(t)
    with pytest.raises(QpuffError):
        conic.solve(prog).require()


def test_dl_primal_on_qubit_triple():
    rho, sigma, delta = np.diag([0.75, 0.25]), np.diag([0.5, 0.5]), 0.1
    prog = conic.ConicProgram()
    lam = prog.scalar("lam", nonneg=True)
    z = prog.hermitian("Z", 2)
    prog.psd(z - (rho - lam * sigma), name="dominance")
    prog.le(z.trace().real(), delta, name="budget")
    prog.minimize(lam)
    res = conic.solve(prog).require()
    assert res.primal == pytest.approx(1.3, abs=1e-6)
    assert abs(res.primal - res.dual) <= 1e-6 * (1 + res.primal)


def test_min_eigenvalue_sdp(rng):
    """max t s.t. H - t I >= 0 recovers the smallest eigenvalue of a complex Hermitian."""
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = (g + g.conj().T) / 2
    prog = conic.ConicProgram()
    t = prog.scalar("t")
    prog.psd(h - t * np.eye(3), name="shift")
    prog.maximize(t)
    res = conic.solve(prog).require()
    assert res.primal == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-6)


def test_fidelity_style_objective_with_hermitian_variable(rng):
    """max Tr[X rho] over 0 <= X <= I is the trace of rho."""
    rho = random_state(3, seed=rng)
    prog = conic.ConicProgram()
    x = prog.hermitian("X", 3)
    prog.psd(np.eye(3) - x)
    prog.maximize(x.inner(rho).real())
    res = conic.solve(prog).require()
    assert res.primal == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(res.value(x), np.eye(3), atol=1e-4)


def test_affine_products_rejected():
    prog = conic.ConicProgram()
    a, b = prog.scalar("a"), prog.scalar("b")
    with pytest.raises(TypeError):
        a * b


def test_env_tolerance(monkeypatch):
    monkeypatch.setenv("QPUFF_SOLVER_TOL", "1e-6")
    assert conic.default_tol() == 1e-6
    monkeypatch.setenv("QPUFF_SOLVER_TOL", "abc")
    with pytest.raises(QpuffError):
        conic.default_tol()
    monkeypatch.delenv("QPUFF_SOLVER_TOL")
    assert conic.default_tol() == conic.DEFAULT_TOL
