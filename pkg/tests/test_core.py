import numpy as np
import pytest

from qpuff import core
from qpuff.core import QuantumChannel, ValidationError
from qpuff.mechanism import depolarize

from conftest import RHO_DIAG, SIGMA_DIAG


def test_positive_part_diagonal():
    out = core.positive_part(np.diag([0.3, -0.2]))
    assert np.allclose(out, np.diag([0.3, 0.0]))
    assert np.allclose(core.positive_part(np.zeros((3, 3))), 0)


def test_positive_part_hand_example():
    out = core.positive_part(RHO_DIAG - 1.3 * SIGMA_DIAG)
    assert np.allclose(out, np.diag([0.1, 0.0]))
    assert np.trace(out).real == pytest.approx(0.1)


def test_positive_part_decomposition(rng):
    for _ in range(20):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a = (g + g.conj().T) / 2
        pp, pn = core.positive_part(a), core.positive_part(-a)
        assert np.allclose(a, pp - pn, atol=1e-8)
        assert core.trace_norm(a) == pytest.approx(np.trace(pp).real + np.trace(pn).real, abs=1e-8)
        assert np.linalg.eigvalsh(pp).min() > -1e-10


def test_trace_norm_examples(rng):
    assert core.trace_norm(np.diag([0.5, -0.5])) == pytest.approx(1.0)
    assert core.trace_norm(RHO_DIAG - SIGMA_DIAG) == pytest.approx(0.5)
    assert core.trace_norm(core.random_state(3, seed=rng)) == pytest.approx(1.0)


def test_fidelity_symmetric_and_unit(rng):
    r, s = core.random_state(3, seed=rng), core.random_state(3, seed=rng)
    assert core.fidelity(r, s) == pytest.approx(core.fidelity(s, r), abs=1e-9)
    assert core.fidelity(r, r) == pytest.approx(1.0, abs=1e-9)
    assert 0 <= core.fidelity(r, s) <= 1
    # commuting states: squared Bhattacharyya coefficient
    assert core.fidelity(RHO_DIAG, SIGMA_DIAG) == pytest.approx((np.sqrt(0.375) + np.sqrt(0.125)) ** 2)


def test_partial_trace_product(rng):
    r, s = core.random_state(2, seed=rng), core.random_state(3, seed=rng)
    big = np.kron(r, s)
    assert np.allclose(core.partial_trace(big, (2, 3), 0), r, atol=1e-10)
    assert np.allclose(core.partial_trace(big, (2, 3), 1), s, atol=1e-10)
    gam = core.max_entangled_choi(3) / 3
    assert np.allclose(core.partial_trace(gam, (3, 3), 1), np.eye(3) / 3)


def test_partial_trace_random_bipartite_unit_trace(rng):
    w = core.random_state(6, seed=rng)
    assert np.trace(core.partial_trace(w, (2, 3), 0)).real == pytest.approx(1.0)


def test_partial_transpose_swap_to_entangled():
    d = 3
    f = core.swap_operator(d)
    pt = core.partial_transpose(f, (d, d), 1)
    assert np.allclose(pt, core.max_entangled_choi(d))
    assert np.allclose(core.partial_transpose(pt, (d, d), 1), f)


def test_partial_transpose_product(rng):
    r, s = core.random_state(2, seed=rng), core.random_state(2, seed=rng)
    assert np.allclose(core.partial_transpose(np.kron(r, s), (2, 2), 1), np.kron(r, s.T))


def test_apply_channel_examples():
    rho = core.basis_state(2, 0)
    assert np.allclose(QuantumChannel.identity(2)(rho), rho)
    assert np.allclose(depolarize(2, 1.0)(rho), np.eye(2) / 2)
    assert np.allclose(depolarize(2, 0.5)(rho), np.diag([0.75, 0.25]))


def test_random_channels_preserve_states(rng):
    for _ in range(100):
        a = core.random_channel(2, 3, seed=rng)
        out = a.apply(core.random_state(2, seed=rng))
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.eigvalsh(out).min() > -1e-7


def test_adjoint_duality(rng):
    ident = QuantumChannel.identity(3)
    m = np.diag([0.1, 0.5, 1.0])
    assert np.allclose(ident.adjoint(m), m)
    assert np.allclose(depolarize(3, 0.4).adjoint(np.eye(3)), np.eye(3))
    for _ in range(10):
        a = core.random_channel(2, 3, seed=rng)
        rho = core.random_state(2, seed=rng)
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        mm = (g + g.conj().T) / 2
        lhs = np.trace(mm @ a(rho))
        rhs = np.trace(a.adjoint(mm) @ rho)
        assert abs(lhs - rhs) < 1e-8


def test_compose_and_tensor(rng):
    a, b = core.random_channel(2, seed=rng), core.random_channel(2, 3, seed=rng)
    rho = core.random_state(2, seed=rng)
    assert np.allclose(a.then(b)(rho), b(a(rho)))
    s = core.random_state(2, seed=rng)
    assert np.allclose(a.tensor(b)(np.kron(rho, s)), np.kron(a(rho), b(s)))


def test_kraus_round_trip(rng):
    a = core.random_channel(2, 2, kraus_rank=2, seed=rng)
    again = QuantumChannel.from_kraus(a.kraus())
    assert np.allclose(a.choi, again.choi, atol=1e-10)


def test_validation_errors():
    with pytest.raises(ValidationError):
        core.as_state(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        core.as_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        QuantumChannel(2, 2, np.eye(4))  # trace 2 per input, not TP


def test_json_round_trip(tmp_path, rng):
    a = core.random_channel(2, 3, seed=rng)
    again = QuantumChannel.from_dict(a.to_dict())
    assert np.allclose(a.choi, again.choi)
    with pytest.raises(ValidationError):
        core.matrix_from_dict({"dim": 3, "re": [[1, 0], [0, 1]]})


def test_sanitize_is_explicit():
    a = np.diag([1.0 + 1e-6, -1e-6])
    with pytest.raises(ValidationError):
        core.as_state(a)
    fixed = core.sanitize(a, trace_one=True)
    assert np.linalg.eigvalsh(fixed).min() >= 0
    assert np.trace(fixed).real == pytest.approx(1.0)


def test_instrument_from_povm():
    povm = [np.diag([0.7, 0.2]), np.diag([0.3, 0.8])]
    inst = core.QuantumInstrument.from_povm(povm)
    rho = core.basis_state(2, 0)
    total = sum(np.trace(inst.apply_branch(y, rho)).real for y in inst.labels)
    assert total == pytest.approx(1.0)
