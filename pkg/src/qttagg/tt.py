"""Tensor-train (MPS) vectors and operators with finite-precision algebra.

A :class:`TensorTrain` encodes a length ``prod(physical_dims)`` complex
vector as a chain of 3-index cores ``(left_bond, physical, right_bond)``
with trivial boundary bonds.  All operations return new values; cores are
never mutated in place, so values can be shared freely across threads.
"""

from __future__ import annotations

import base64
import json
import math
import os
import struct

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError

DEFAULT_BOND_CAP = 4096
DENSE_SAFETY_CAP = 2**24

# Singular values below this fraction of the largest one are treated as
# numerical zeros even at tolerance 0, so exact-rank structure is recovered.
_RANK_FLOOR = 1e-14

_RAW_CORE_ENTRY_CAP = 2**27  # ~2 GiB of complex128 per core


def bond_cap() -> int:
    """Global hard cap on bond dimensions; QTTAGG_BOND_CAP overrides."""
    raw = os.environ.get("QTTAGG_BOND_CAP")
    if raw:
        try:
            return int(raw)
        except ValueError as exc:
            raise InvalidArgumentError(f"QTTAGG_BOND_CAP={raw!r} is not an integer") from exc
    return DEFAULT_BOND_CAP


def _as_core(a, ndim):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != ndim:
        raise InvalidArgumentError(f"core must have {ndim} axes, got shape {a.shape}")
    return a


class TensorTrain:
    """Chain of complex cores with shapes (chi_{k-1}, l_k, chi_k)."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = [_as_core(c, 3) for c in cores]
        if not cores:
            raise InvalidArgumentError("a tensor train needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise InvalidArgumentError("boundary bonds must have size 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise InvalidArgumentError(
                    f"bond mismatch between cores {k} and {k + 1}: "
                    f"{cores[k].shape[2]} != {cores[k + 1].shape[0]}")
        self.cores = cores

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    @property
    def physical_dims(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def bond_dims(self):
        """Interior bond sizes (chi_1, ..., chi_{n-1}); empty for one core."""
        return tuple(c.shape[2] for c in self.cores[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @property
    def size(self) -> int:
        return int(np.prod([c.shape[1] for c in self.cores], dtype=object))

    @property
    def nbytes(self) -> int:
        return sum(c.nbytes for c in self.cores)

    def conj(self) -> "TensorTrain":
        return TensorTrain([c.conj() for c in self.cores])

    def reverse(self) -> "TensorTrain":
        """Same data with the core order (digit significance) reversed."""
        return TensorTrain([c.transpose(2, 1, 0) for c in reversed(self.cores)])

    def __repr__(self):
        return (f"TensorTrain(n={self.n_cores}, dims={self.physical_dims}, "
                f"bonds={self.bond_dims})")


class TtOperator:
    """Linear operator in TT form; cores (chi, l_out, l_in, chi')."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = [_as_core(c, 4) for c in cores]
        if not cores:
            raise InvalidArgumentError("an operator needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise InvalidArgumentError("boundary bonds must have size 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[3] != cores[k + 1].shape[0]:
                raise InvalidArgumentError(f"bond mismatch between operator cores {k} and {k + 1}")
        self.cores = cores

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    @property
    def bond_dims(self):
        return tuple(c.shape[3] for c in self.cores[:-1])

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def conj(self) -> "TtOperator":
        return TtOperator([c.conj() for c in self.cores])

    def scale(self, factor) -> "TtOperator":
        cores = [c.copy() for c in self.cores]
        cores[0] = cores[0] * factor
        return TtOperator(cores)


# ---------------------------------------------------------------------------
# element access / densification

def digits_of_index(j: int, n: int, base: int = 2):
    """Big-endian digit expansion of j with n digits."""
    if not 0 <= j < base**n:
        raise InvalidArgumentError(f"index {j} out of range for {n} digits")
    out = []
    for k in range(n - 1, -1, -1):
        out.append((j // base**k) % base)
    return tuple(out)


def index_of_digits(digits, base: int = 2) -> int:
    j = 0
    for d in digits:
        j = j * base + int(d)
    return j


def tt_element(tt: TensorTrain, digits) -> complex:
    """Entry of the encoded vector at the given big-endian digit string."""
    if len(digits) != tt.n_cores:
        raise InvalidArgumentError(f"expected {tt.n_cores} digits, got {len(digits)}")
    vec = None
    for core, d in zip(tt.cores, digits):
        d = int(d)
        if not 0 <= d < core.shape[1]:
            raise InvalidArgumentError(f"digit {d} out of range for physical dim {core.shape[1]}")
        mat = core[:, d, :]
        vec = mat if vec is None else vec @ mat
    return complex(vec[0, 0])


def tt_to_dense(tt: TensorTrain, cap: int = DENSE_SAFETY_CAP) -> np.ndarray:
    """Materialize the full vector; refuses above the safety cap."""
    if tt.size > cap:
        raise ResourceLimitError(f"dense size {tt.size} exceeds cap {cap}")
    vec = tt.cores[0].reshape(tt.cores[0].shape[1], -1)
    for core in tt.cores[1:]:
        vec = np.tensordot(vec, core, axes=(-1, 0))
        vec = vec.reshape(-1, core.shape[2])
    return np.ascontiguousarray(vec[:, 0])


def tt_from_dense(values, physical_dims, eps: float = 0.0,
                  max_bond: int | None = None) -> TensorTrain:
    """TT-SVD decomposition of a dense vector.

    The reconstruction error is at most ``eps`` relative to the L2 norm of
    the input; bond dimensions are the smallest achievable by sequential
    singular-value truncation under that budget.
    """
    if eps < 0:
        raise InvalidArgumentError("eps must be nonnegative")
    values = np.asarray(values, dtype=np.complex128).reshape(-1)
    dims = [int(d) for d in physical_dims]
    if int(np.prod(dims)) != values.size:
        raise InvalidArgumentError(
            f"length {values.size} does not match physical dims {tuple(dims)}")
    cap = bond_cap() if max_bond is None else max_bond
    n = len(dims)
    if n == 1:
        return TensorTrain([values.reshape(1, dims[0], 1)])
    norm = np.linalg.norm(values)
    tau = eps * norm / math.sqrt(n - 1)
    cores = []
    rank = 1
    rest = values
    for k in range(n - 1):
        mat = rest.reshape(rank * dims[k], -1)
        u, s, vh = _svd(mat)
        r = _select_rank(s, tau)
        if r > cap:
            raise ResourceLimitError(f"bond {r} needed at split {k} exceeds cap {cap}")
        cores.append(u[:, :r].reshape(rank, dims[k], r))
        rest = s[:r, None] * vh[:r]
        rank = r
    cores.append(rest.reshape(rank, dims[-1], 1))
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# elementary algebra

def tt_hadamard(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Exact entrywise product; bond dimensions multiply."""
    _check_same_shape(a, b)
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        la, p, ra = ca.shape
        lb, _, rb = cb.shape
        if la * lb * p * ra * rb > _RAW_CORE_ENTRY_CAP:
            raise ResourceLimitError(
                f"raw Hadamard core of {la * lb}x{p}x{ra * rb} entries is too large")
        core = np.einsum("apr,bpq->abprq", ca, cb)
        cores.append(core.reshape(la * lb, p, ra * rb))
    return TensorTrain(cores)


def tt_add(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Entrywise sum via block construction; bond dimensions add."""
    _check_same_shape(a, b)
    if a.n_cores == 1:
        return TensorTrain([a.cores[0] + b.cores[0]])
    cores = []
    for k, (ca, cb) in enumerate(zip(a.cores, b.cores)):
        la, p, ra = ca.shape
        lb, _, rb = cb.shape
        if k == 0:
            core = np.concatenate([ca, cb], axis=2)
        elif k == a.n_cores - 1:
            core = np.concatenate([ca, cb], axis=0)
        else:
            core = np.zeros((la + lb, p, ra + rb), dtype=np.complex128)
            core[:la, :, :ra] = ca
            core[la:, :, ra:] = cb
        cores.append(core)
    return TensorTrain(cores)


def tt_scale(a: TensorTrain, factor) -> TensorTrain:
    cores = [c.copy() for c in a.cores]
    cores[0] = cores[0] * complex(factor)
    return TensorTrain(cores)


def tt_inner(a: TensorTrain, b: TensorTrain) -> complex:
    """<a|b>, conjugate-linear in ``a`` and linear in ``b``."""
    _check_same_shape(a, b)
    env = np.ones((1, 1), dtype=np.complex128)
    for ca, cb in zip(a.cores, b.cores):
        env = np.einsum("ab,apc,bpd->cd", env, ca.conj(), cb, optimize=True)
    return complex(env[0, 0])


def tt_norm(a: TensorTrain) -> float:
    return math.sqrt(max(tt_inner(a, a).real, 0.0))


def apply_operator(op: TtOperator, x: TensorTrain, eps: float = 0.0,
                   max_bond: int | None = None) -> TensorTrain:
    """Matrix-vector product in TT form, truncated to relative error eps.

    Zip-up contraction mirroring :func:`tt_hadamard_truncate`: the operand
    is left-canonicalized, sites are contracted right to left with rank
    selection in the operator's prefix-Gram metric (30% of the budget), and
    a rigorous forward sweep spends the rest.
    """
    n = op.n_cores
    if n != x.n_cores:
        raise InvalidArgumentError(f"operator has {n} cores, operand {x.n_cores}")
    for co, cx in zip(op.cores, x.cores):
        if co.shape[2] != cx.shape[1]:
            raise InvalidArgumentError(
                f"operator input dim {co.shape[2]} != operand dim {cx.shape[1]}")
    cap = bond_cap() if max_bond is None else max_bond
    if n == 1:
        core = np.einsum("asib,lir->lsr", op.cores[0], x.cores[0])
        return TensorTrain([core])

    vec = [c.copy() for c in x.cores]
    _left_canonicalize(vec)
    fused = [c.reshape(c.shape[0], -1, c.shape[3]) for c in op.cores]
    weights = [_psd_sqrt(h) for h in _prefix_grams(fused)]

    zip_rel = 0.3 * eps / math.sqrt(n - 1)
    cores = [None] * n
    carry = np.ones((1, 1, 1), dtype=np.complex128)
    for k in range(n - 1, 0, -1):
        cx, co = vec[k], op.cores[k]
        xl = cx.shape[0]
        ol, so = co.shape[0], co.shape[1]
        t = np.einsum("xir,roq->xioq", cx, carry, optimize=True)
        t = np.einsum("xioq,lsio->xlsq", t, co, optimize=True)
        mat = t.reshape(xl * ol, so * t.shape[3])
        weighted = np.einsum("bc,acj->abj", weights[k],
                             mat.reshape(xl, ol, -1), optimize=True)
        u, s, vh = _svd(weighted.reshape(xl * ol, -1))
        keep = _select_rank(s, zip_rel * np.linalg.norm(s))
        if keep > cap:
            raise ResourceLimitError(
                f"bond {keep} needed applying operator exceeds cap {cap}")
        basis = vh[:keep]
        cores[k] = basis.reshape(keep, so, -1)
        carry = (mat @ basis.conj().T).reshape(xl, ol, keep)
    t = np.einsum("xir,roq->xioq", vec[0], carry, optimize=True)
    t = np.einsum("xioq,lsio->xlsq", t, op.cores[0], optimize=True)
    cores[0] = t.reshape(1, t.shape[2], t.shape[3])

    norm = np.linalg.norm(cores[0])
    tau = 0.7 * eps * norm / math.sqrt(n - 1)
    _truncate_sweep(cores, tau, cap)
    return TensorTrain(cores)


# ---------------------------------------------------------------------------
# truncation

def _svd(mat):
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        import scipy.linalg as sla
        return sla.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _select_rank(s, tau):
    """Smallest rank whose discarded singular-value tail is within tau."""
    if s.size == 0:
        return 1
    floor = _RANK_FLOOR * s[0]
    tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]  # tail[r] = ||s[r:]||
    keep = s.size
    for r in range(s.size, 0, -1):
        if tail[r - 1] <= max(tau, 0.0) or s[r - 1] <= floor:
            keep = r - 1
        else:
            break
    return max(keep, 1)


def _right_orthogonalize(cores):
    """In-place sweep making cores[1:] right-orthonormal; returns the norm."""
    for k in range(len(cores) - 1, 0, -1):
        l, p, r = cores[k].shape
        mat = cores[k].reshape(l, p * r)
        q, rfac = np.linalg.qr(mat.conj().T, mode="reduced")
        m = q.shape[1]
        cores[k] = q.conj().T.reshape(m, p, r)
        cores[k - 1] = np.tensordot(cores[k - 1], rfac.conj().T, axes=(2, 0))
    norm = np.linalg.norm(cores[0])
    return float(norm)


def _truncate_sweep(cores, tau, cap, step=None):
    """Left-to-right two-site truncation of a right-orthogonal chain.

    Each bond is reduced with an SVD of the two-site block factored through
    the current bond (a QR on each side keeps the SVD at the bond size).
    Discarded weight per bond stays below tau, so the total error adds in
    quadrature.  Leaves the chain left-canonical with the weight in the
    last core.
    """
    n = len(cores)
    for k in range(n - 1):
        l, p, r = cores[k].shape
        r2, q, m = cores[k + 1].shape
        amat = cores[k].reshape(l * p, r)
        bmat = cores[k + 1].reshape(r2, q * m)
        qa, ra = np.linalg.qr(amat, mode="reduced")
        qb, rb = np.linalg.qr(bmat.conj().T, mode="reduced")
        u, s, vh = _svd(ra @ rb.conj().T)
        keep = _select_rank(s, tau)
        if keep > cap:
            raise ResourceLimitError(
                f"bond {keep} needed at bond {k} exceeds cap {cap}", step=step)
        cores[k] = (qa @ u[:, :keep]).reshape(l, p, keep)
        carry = (s[:keep, None] * vh[:keep]) @ qb.conj().T
        cores[k + 1] = carry.reshape(keep, q, m)


def tt_truncate(tt: TensorTrain, eps: float, max_bond: int | None = None,
                absolute: bool = False, step=None) -> TensorTrain:
    """Rank reduction with a relative (default) or absolute L2 error budget.

    The result is left-canonical; with eps=0 only numerically-zero singular
    values are dropped, so the value is preserved to machine precision.
    Raises :class:`ResourceLimitError` if meeting the budget needs a bond
    above ``max_bond`` (global cap by default).
    """
    if eps < 0:
        raise InvalidArgumentError("eps must be nonnegative")
    cap = bond_cap() if max_bond is None else max_bond
    cores = [c.copy() for c in tt.cores]
    if len(cores) == 1:
        return TensorTrain(cores)
    norm = _right_orthogonalize(cores)
    tau = eps if absolute else eps * norm
    tau /= math.sqrt(len(cores) - 1)
    _truncate_sweep(cores, tau, cap, step=step)
    return TensorTrain(cores)


def _left_canonicalize(cores):
    """In-place sweep making cores[:-1] left-orthonormal."""
    for k in range(len(cores) - 1):
        l, p, r = cores[k].shape
        q, rfac = np.linalg.qr(cores[k].reshape(l * p, r), mode="reduced")
        cores[k] = q.reshape(l, p, q.shape[1])
        cores[k + 1] = np.tensordot(rfac, cores[k + 1], axes=(1, 0))


def _psd_sqrt(mat):
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def _prefix_grams(cores):
    """Gram matrices of the prefix vector families at each bond."""
    grams = [np.ones((1, 1), dtype=np.complex128)]
    for core in cores[:-1]:
        h = grams[-1]
        grams.append(np.einsum("apb,ac,cpd->bd", core.conj(), h, core,
                               optimize=True))
    return grams


def tt_hadamard_truncate(a: TensorTrain, b: TensorTrain, eps: float,
                         max_bond: int | None = None, step=None) -> TensorTrain:
    """Entrywise product followed by truncation to relative error ~eps.

    Equivalent to ``tt_truncate(tt_hadamard(a, b), eps)`` but never sweeps
    the full raw product: the larger factor is left-canonicalized and a
    right-to-left zip contracts one site at a time, truncating against the
    smaller factor's prefix-Gram metric with 30% of the budget; a final
    rigorous left-to-right sweep spends the remaining 70%.  Agreement with
    the exact path is covered by tests.
    """
    _check_same_shape(a, b)
    cap = bond_cap() if max_bond is None else max_bond
    n = a.n_cores
    if n == 1:
        return TensorTrain([a.cores[0] * b.cores[0]])
    if a.max_bond < b.max_bond:
        a, b = b, a

    big = [c.copy() for c in a.cores]
    _left_canonicalize(big)
    weights = [_psd_sqrt(h) for h in _prefix_grams(b.cores)]

    zip_rel = 0.3 * eps / math.sqrt(n - 1)
    cores = [None] * n
    # carry maps the fused raw right bond (chi_a, chi_b) onto the kept basis
    carry = np.ones((1, 1, 1), dtype=np.complex128)
    for k in range(n - 1, 0, -1):
        ca, cb = big[k], b.cores[k]
        la, p, _ = ca.shape
        lb = cb.shape[0]
        t = np.einsum("apr,rbq->apbq", ca, carry, optimize=True)
        t = np.einsum("apbq,lpb->alpq", t, cb, optimize=True)
        mat = t.reshape(la * lb, p * t.shape[3])
        weighted = np.einsum("bc,acj->abj", weights[k],
                             mat.reshape(la, lb, -1), optimize=True)
        u, s, vh = _svd(weighted.reshape(la * lb, -1))
        keep = _select_rank(s, zip_rel * np.linalg.norm(s))
        if keep > cap:
            raise ResourceLimitError(
                f"bond {keep} needed during product exceeds cap {cap}", step=step)
        basis = vh[:keep]
        cores[k] = basis.reshape(keep, p, -1)
        carry = (mat @ basis.conj().T).reshape(la, lb, keep)
    t = np.einsum("apr,rbq->apbq", big[0], carry, optimize=True)
    t = np.einsum("apbq,lpb->alpq", t, b.cores[0], optimize=True)
    cores[0] = t.reshape(1, t.shape[2], t.shape[3])

    # zip rows are orthonormal, so a single forward sweep finishes the job
    norm = np.linalg.norm(cores[0])
    tau = 0.7 * eps * norm / math.sqrt(n - 1)
    _truncate_sweep(cores, tau, cap, step=step)
    return TensorTrain(cores)


def _check_same_shape(a: TensorTrain, b: TensorTrain):
    if a.n_cores != b.n_cores:
        raise InvalidArgumentError(f"core counts differ: {a.n_cores} vs {b.n_cores}")
    if a.physical_dims != b.physical_dims:
        raise InvalidArgumentError(
            f"physical dims differ: {a.physical_dims} vs {b.physical_dims}")


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"QTT1"
_VERSION = 1


def tt_to_bytes(tt: TensorTrain) -> bytes:
    """Binary container: magic, version u16, core count u16, then per core
    left u32 / physical u16 / right u32 and row-major complex128 LE data."""
    parts = [_MAGIC, struct.pack("<HH", _VERSION, tt.n_cores)]
    for core in tt.cores:
        l, p, r = core.shape
        parts.append(struct.pack("<IHI", l, p, r))
        parts.append(np.ascontiguousarray(core, dtype="<c16").tobytes())
    return b"".join(parts)


def tt_from_bytes(data: bytes) -> TensorTrain:
    if data[:4] != _MAGIC:
        raise InvalidArgumentError("bad magic; not a QTT container")
    version, count = struct.unpack_from("<HH", data, 4)
    if version != _VERSION:
        raise InvalidArgumentError(f"unsupported container version {version}")
    off = 8
    cores = []
    for _ in range(count):
        l, p, r = struct.unpack_from("<IHI", data, off)
        off += 10
        nbytes = l * p * r * 16
        arr = np.frombuffer(data[off:off + nbytes], dtype="<c16").reshape(l, p, r)
        off += nbytes
        cores.append(arr.astype(np.complex128))
    return TensorTrain(cores)


def tt_to_json(tt: TensorTrain) -> str:
    """Debug form mirroring the binary fields with base64 payloads."""
    obj = {
        "magic": _MAGIC.decode(),
        "version": _VERSION,
        "cores": [
            {
                "left": int(c.shape[0]),
                "physical": int(c.shape[1]),
                "right": int(c.shape[2]),
                "data": base64.b64encode(
                    np.ascontiguousarray(c, dtype="<c16").tobytes()).decode(),
            }
            for c in tt.cores
        ],
    }
    return json.dumps(obj)


def tt_from_json(text: str) -> TensorTrain:
    obj = json.loads(text)
    if obj.get("magic") != _MAGIC.decode() or obj.get("version") != _VERSION:
        raise InvalidArgumentError("bad magic/version in JSON container")
    cores = []
    for spec in obj["cores"]:
        raw = base64.b64decode(spec["data"])
        arr = np.frombuffer(raw, dtype="<c16").reshape(
            spec["left"], spec["physical"], spec["right"])
        cores.append(arr.astype(np.complex128))
    return TensorTrain(cores)
