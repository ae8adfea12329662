"""Dense Hermitian linear algebra, quantum states, channels and instruments.

Operators are plain complex ``numpy`` arrays. The ``as_*`` validators
symmetrize and check their input and return a read-only copy, so downstream
code can rely on Hermiticity without re-checking.

Choi convention: for a map ``N: L(H_in) -> L(H_out)`` the Choi matrix is

    Gamma = sum_ij |i><j| (x) N(|i><j|)

on ``H_in (x) H_out`` (unnormalized), and ``N(rho) = Tr_in[(rho^T (x) I) Gamma]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

HERMITIAN_TOL = 1e-8
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
TP_TOL = 1e-8


class QpuffError(Exception):
    """Base class for domain errors raised by this package."""


class NumericalError(QpuffError):
    """An eigensolver or optimizer failed to produce a trustworthy answer."""


class ValidationError(QpuffError, ValueError):
    """An input violates a documented invariant."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def as_hermitian(a, atol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``(a + a^dagger)/2`` as a read-only array.

    Raises ``ValidationError`` if ``a`` is not square or deviates from
    Hermitian by more than ``atol`` in any entry.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if asym > atol:
        raise ValidationError(f"matrix is not Hermitian (max asymmetry {asym:.3g})")
    return _frozen((a + a.conj().T) / 2)


def eigh(a: np.ndarray):
    """Hermitian eigendecomposition with failures mapped to ``NumericalError``."""
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc


def as_psd(a, atol: float = PSD_TOL) -> np.ndarray:
    h = as_hermitian(a)
    wmin = eigh(h)[0][0]
    if wmin < -atol:
        raise ValidationError(f"matrix is not positive semidefinite (min eigenvalue {wmin:.3g})")
    return h


def as_state(a, atol: float = PSD_TOL) -> np.ndarray:
    """Validate a density operator: Hermitian, PSD up to ``atol``, unit trace."""
    h = as_psd(a, atol)
    tr = np.trace(h).real
    if abs(tr - 1) > TRACE_TOL:
        raise ValidationError(f"density operator must have unit trace, got {tr:.12g}")
    return h


def as_measurement(a, atol: float = PSD_TOL) -> np.ndarray:
    """Validate a measurement operator ``0 <= M <= I``."""
    h = as_hermitian(a)
    w = eigh(h)[0]
    if w[0] < -atol or w[-1] > 1 + atol:
        raise ValidationError(f"measurement operator eigenvalues must lie in [0, 1], got [{w[0]:.3g}, {w[-1]:.3g}]")
    return h


def sanitize(a, trace_one: bool = False) -> np.ndarray:
    """Explicitly project onto the PSD cone (and optionally renormalize).

    This is the only place negative eigenvalues are clipped; validators never
    do it silently.
    """
    h = np.asarray(a, dtype=complex)
    h = (h + h.conj().T) / 2
    w, v = eigh(h)
    w = np.clip(w, 0, None)
    out = (v * w) @ v.conj().T
    if trace_one:
        tr = np.trace(out).real
        if tr <= 0:
            raise ValidationError("cannot renormalize an operator with zero trace")
        out = out / tr
    return _frozen((out + out.conj().T) / 2)


# ---------------------------------------------------------------------------
# spectral primitives


def positive_part(a) -> np.ndarray:
    """Projection of ``a`` onto its eigenspaces with eigenvalue >= 0."""
    w, v = eigh(np.asarray(a, dtype=complex))
    w = np.where(w >= 0, w, 0.0)
    return (v * w) @ v.conj().T


def trace_norm(a) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.sum(np.abs(eigh(np.asarray(a, dtype=complex))[0])))


def positive_part_trace(a) -> float:
    """``Tr[(a)_+]`` from the eigenvalues, without forming the projection."""
    w = eigh(np.asarray(a, dtype=complex))[0]
    return float(np.sum(w[w >= 0]))


def matrix_function(a, fn, floor: float | None = None) -> np.ndarray:
    """Apply ``fn`` to the eigenvalues of Hermitian ``a``.

    With ``floor`` set, eigenvalues at or below it are mapped to zero instead
    of being passed to ``fn`` (support restriction).
    """
    w, v = eigh(np.asarray(a, dtype=complex))
    if floor is None:
        fw = fn(w)
    else:
        keep = w > floor
        fw = np.zeros_like(w)
        fw[keep] = fn(w[keep])
    return (v * fw) @ v.conj().T


def psd_sqrt(a) -> np.ndarray:
    return matrix_function(a, lambda w: np.sqrt(np.clip(w, 0, None)))


def fidelity(rho, sigma) -> float:
    """Uhlmann fidelity ``||sqrt(rho) sqrt(sigma)||_1^2``."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch {rho.shape} vs {sigma.shape}")
    s = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(min(1.0, np.sum(s) ** 2))


def trace_distance(rho, sigma) -> float:
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def von_neumann_entropy(rho, floor: float = 1e-14) -> float:
    """Entropy in nats, with eigenvalues below ``floor`` contributing zero."""
    w = eigh(np.asarray(rho, dtype=complex))[0]
    w = w[w > floor]
    return float(-np.sum(w * np.log(w)))


# ---------------------------------------------------------------------------
# subsystems


def _check_dims(a: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims) or int(np.prod(dims)) != a.shape[-1] or a.shape[-1] != a.shape[-2]:
        raise ValidationError(f"dims {dims} inconsistent with matrix shape {a.shape[-2:]}")
    return dims


def partial_trace(a, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``dims`` lists subsystem dimensions; ``keep`` is an index or a sequence
    of indices. Leading batch axes of ``a`` are carried through.
    """
    a = np.asarray(a)
    dims = _check_dims(a, dims)
    keep = [keep] if np.isscalar(keep) else sorted(int(k) for k in keep)
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValidationError(f"subsystem index out of range for dims {dims}")
    batch = a.shape[:-2]
    t = a.reshape(batch + dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "..." + "".join(row) + "".join(col) + "->..." + out
    res = np.einsum(spec, t)
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    return res.reshape(batch + (dk, dk))


def partial_transpose(a, dims: Sequence[int], sys) -> np.ndarray:
    """Transpose the listed subsystem(s) of ``a``; batch axes allowed."""
    a = np.asarray(a)
    dims = _check_dims(a, dims)
    sys = [sys] if np.isscalar(sys) else list(sys)
    n = len(dims)
    batch = a.shape[:-2]
    nb = len(batch)
    t = a.reshape(batch + dims + dims)
    perm = list(range(nb + 2 * n))
    for s in sys:
        perm[nb + s], perm[nb + n + s] = nb + n + s, nb + s
    return t.transpose(perm).reshape(a.shape)


def permute_systems(a, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator: new factor ``k`` is old ``order[k]``."""
    a = np.asarray(a)
    dims = _check_dims(a, dims)
    n = len(dims)
    t = a.reshape(dims + dims)
    perm = list(order) + [n + o for o in order]
    d = a.shape[-1]
    return t.transpose(perm).reshape(d, d)


def kron(*ops) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def swap_operator(d: int) -> np.ndarray:
    """The swap ``F`` on ``C^d (x) C^d``."""
    f = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            f[i * d + j, j * d + i] = 1
    return f.astype(complex)


def max_entangled_choi(d: int) -> np.ndarray:
    """Unnormalized ``Gamma = sum_ij |ii><jj|``."""
    v = np.eye(d).reshape(d * d)
    return np.outer(v, v).astype(complex)


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[i] = 1
    return v


def basis_state(d: int, i: int) -> np.ndarray:
    return np.outer(ket(d, i), ket(d, i).conj())


# ---------------------------------------------------------------------------
# channels


def _choi_apply(choi: np.ndarray, din: int, dout: int, rho: np.ndarray) -> np.ndarray:
    t = choi.reshape(din, dout, din, dout)
    # N(rho)[c, c'] = sum_{a,a'} rho[a, a'] * Gamma[a, c, a', c']
    return np.einsum("ab,acbd->cd", rho, t)


def link_choi(first: np.ndarray, second: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Choi of ``second o first`` for ``first: A->C`` and ``second: C->D``.

    Works with a leading batch axis on either argument, which lets SDP code
    push affine expressions through the composition.
    """
    da, dc, dd = dims
    f = np.asarray(first)
    s = np.asarray(second)
    fb, sb = f.shape[:-2], s.shape[:-2]
    if fb and sb:
        raise ValidationError("at most one argument may carry batch axes")
    ft = f.reshape(fb + (da, dc, da, dc))
    st = s.reshape(sb + (dc, dd, dc, dd))
    # [a, d, a', d'] = sum_{c, c'} first[a, c, a', c'] * second[c, d, c', d']
    out = np.einsum("...acbe,...cdef->...adbf", ft, st)
    batch = fb or sb
    return out.reshape(batch + (da * dd, da * dd))


@dataclass(frozen=True)
class QuantumChannel:
    """A CPTP map stored as its Choi matrix on ``H_in (x) H_out``."""

    dim_in: int
    dim_out: int
    choi: np.ndarray = field(repr=False)

    def __post_init__(self):
        din, dout = int(self.dim_in), int(self.dim_out)
        if din < 1 or dout < 1:
            raise ValidationError("channel dimensions must be positive")
        choi = np.asarray(self.choi, dtype=complex)
        if choi.shape != (din * dout, din * dout):
            raise ValidationError(f"Choi shape {choi.shape} does not match dims ({din}, {dout})")
        choi = as_psd(choi, atol=max(PSD_TOL, 1e-9 * din * dout))
        tp = partial_trace(choi, (din, dout), 0)
        err = np.max(np.abs(tp - np.eye(din)))
        if err > TP_TOL:
            raise ValidationError(f"map is not trace preserving (deviation {err:.3g})")
        object.__setattr__(self, "dim_in", din)
        object.__setattr__(self, "dim_out", dout)
        object.__setattr__(self, "choi", choi)

    # constructors ---------------------------------------------------------
    @classmethod
    def from_kraus(cls, kraus: Sequence[np.ndarray]) -> "QuantumChannel":
        kraus = [np.asarray(k, dtype=complex) for k in kraus]
        dout, din = kraus[0].shape
        choi = np.zeros((din * dout, din * dout), dtype=complex)
        for k in kraus:
            # column-stacked vec of K in the (in, out) ordering
            v = k.T.reshape(din * dout)
            choi += np.outer(v, v.conj())
        return cls(din, dout, choi)

    @classmethod
    def identity(cls, d: int) -> "QuantumChannel":
        return cls(d, d, max_entangled_choi(d))

    @classmethod
    def from_unitary(cls, u) -> "QuantumChannel":
        return cls.from_kraus([np.asarray(u)])

    @classmethod
    def replacement(cls, din: int, state) -> "QuantumChannel":
        """The map ``rho -> Tr[rho] * state``."""
        state = as_state(state)
        return cls(din, state.shape[0], np.kron(np.eye(din), state))

    # action ----------------------------------------------------------------
    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        if rho.shape != (self.dim_in, self.dim_in):
            raise ValidationError(f"input shape {rho.shape} does not match channel input dim {self.dim_in}")
        out = _choi_apply(self.choi, self.dim_in, self.dim_out, rho)
        return (out + out.conj().T) / 2

    def apply(self, rho) -> np.ndarray:
        """Apply to a density operator and validate the output state."""
        out = self(as_state(rho))
        w = eigh(out)[0][0]
        if w < -1e-7:
            raise ValidationError(f"channel output is not PSD (min eigenvalue {w:.3g})")
        return out

    def adjoint(self, m) -> np.ndarray:
        """Heisenberg picture: ``Tr[M N(rho)] = Tr[N^dagger(M) rho]``."""
        m = np.asarray(m, dtype=complex)
        if m.shape != (self.dim_out, self.dim_out):
            raise ValidationError("operator shape does not match channel output dim")
        t = self.choi.reshape(self.dim_in, self.dim_out, self.dim_in, self.dim_out)
        # [Tr_out (I (x) M) Gamma]^T
        x = np.einsum("cd,adbc->ab", m, t)
        return x.T

    def then(self, other: "QuantumChannel") -> "QuantumChannel":
        """The composition ``other o self``."""
        if other.dim_in != self.dim_out:
            raise ValidationError("composition dimension mismatch")
        choi = link_choi(self.choi, other.choi, (self.dim_in, self.dim_out, other.dim_out))
        return QuantumChannel(self.dim_in, other.dim_out, choi)

    def tensor(self, other: "QuantumChannel") -> "QuantumChannel":
        return QuantumChannel(
            self.dim_in * other.dim_in,
            self.dim_out * other.dim_out,
            tensor_choi(self.choi, (self.dim_in, self.dim_out), other.choi, (other.dim_in, other.dim_out)),
        )

    def kraus(self) -> list[np.ndarray]:
        w, v = eigh(self.choi)
        ops = []
        for lam, vec in zip(w, v.T):
            if lam > 1e-12:
                ops.append(np.sqrt(lam) * vec.reshape(self.dim_in, self.dim_out).T)
        return ops

    # serialization ---------------------------------------------------------
    def to_dict(self) -> dict:
        return {"dim_in": self.dim_in, "dim_out": self.dim_out, "choi": matrix_to_dict(self.choi)}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantumChannel":
        return cls(int(d["dim_in"]), int(d["dim_out"]), matrix_from_dict(d["choi"]))


def tensor_choi(c1: np.ndarray, d1: tuple[int, int], c2: np.ndarray, d2: tuple[int, int]) -> np.ndarray:
    """Choi of ``N1 (x) N2`` ordered as ``(in1 in2) (x) (out1 out2)``."""
    (a1, b1), (a2, b2) = d1, d2
    big = np.kron(c1, c2)
    return permute_systems(big, (a1, b1, a2, b2), (0, 2, 1, 3))


@dataclass(frozen=True)
class QuantumInstrument:
    """Completely positive branches ``{E_y}`` whose sum is trace preserving."""

    dim_in: int
    dim_out: int
    labels: tuple
    chois: tuple = field(repr=False)

    def __post_init__(self):
        din, dout = int(self.dim_in), int(self.dim_out)
        if len(self.labels) != len(self.chois) or not self.labels:
            raise ValidationError("instrument needs one label per branch")
        chois = tuple(as_psd(c, atol=1e-9 * din * dout) for c in self.chois)
        total = sum(chois)
        err = np.max(np.abs(partial_trace(total, (din, dout), 0) - np.eye(din)))
        if err > TP_TOL:
            raise ValidationError(f"instrument branches do not sum to a trace-preserving map ({err:.3g})")
        object.__setattr__(self, "chois", chois)
        object.__setattr__(self, "labels", tuple(self.labels))

    def branch(self, y) -> np.ndarray:
        return self.chois[self.labels.index(y)]

    def apply_branch(self, y, rho) -> np.ndarray:
        return _choi_apply(self.branch(y), self.dim_in, self.dim_out, np.asarray(rho, dtype=complex))

    @classmethod
    def from_povm(cls, povm: Sequence[np.ndarray], labels=None) -> "QuantumInstrument":
        """Measure-and-keep instrument ``E_y(rho) = sqrt(M_y) rho sqrt(M_y)``."""
        povm = [as_measurement(m) for m in povm]
        d = povm[0].shape[0]
        chois = []
        for m in povm:
            k = psd_sqrt(m)
            v = k.T.reshape(d * d)
            chois.append(np.outer(v, v.conj()))
        return cls(d, d, tuple(labels or range(len(povm))), tuple(chois))

    def to_list(self) -> list:
        return [{"label": lab, "choi": matrix_to_dict(c)} for lab, c in zip(self.labels, self.chois)]


def check_povm(povm: Sequence[np.ndarray], atol: float = TP_TOL) -> list[np.ndarray]:
    ops = [as_measurement(m) for m in povm]
    if not ops:
        raise ValidationError("empty POVM")
    err = np.max(np.abs(sum(ops) - np.eye(ops[0].shape[0])))
    if err > atol:
        raise ValidationError(f"POVM elements do not sum to the identity (deviation {err:.3g})")
    return ops


# ---------------------------------------------------------------------------
# randomness


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def haar_isometry(rows: int, cols: int, seed=None) -> np.ndarray:
    """Haar-random isometry ``V`` with ``V^dagger V = I`` via QR with phase fix."""
    rng = _rng(seed)
    g = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_state(d: int, rank: int | None = None, seed=None) -> np.ndarray:
    """Random density operator from the induced (Ginibre) measure."""
    rng = _rng(seed)
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return as_state(rho / np.trace(rho).real)


def random_pure_state(d: int, seed=None) -> np.ndarray:
    v = haar_isometry(d, 1, seed)[:, 0]
    return as_state(np.outer(v, v.conj()))


def random_channel(din: int, dout: int | None = None, kraus_rank: int | None = None, seed=None) -> QuantumChannel:
    """Random CPTP map via a Haar isometry ``H_in -> H_out (x) H_env``."""
    dout = din if dout is None else dout
    kraus_rank = din * dout if kraus_rank is None else kraus_rank
    v = haar_isometry(dout * kraus_rank, din, seed)
    t = v.reshape(dout, kraus_rank, din)
    return QuantumChannel.from_kraus([t[:, k, :] for k in range(kraus_rank)])


# ---------------------------------------------------------------------------
# JSON


def matrix_to_dict(a) -> dict:
    a = np.asarray(a, dtype=complex)
    return {"dim": int(a.shape[0]), "re": a.real.tolist(), "im": a.imag.tolist()}


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros_like(re)), dtype=float)
        dim = int(d.get("dim", re.shape[0]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise ValidationError(f"matrix JSON entries do not match dim {dim}")
    return re + 1j * im


def load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_state(path) -> np.ndarray:
    return as_state(matrix_from_dict(load_json(path)))


def load_channel(path) -> QuantumChannel:
    return QuantumChannel.from_dict(load_json(path))
