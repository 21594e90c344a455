"""Dense cubic-matrix arithmetic.

Storage is a read-only ``(m, m, m)`` float array; every index is 0-based and
the flat layout is ``offset = i*m*m + j*m + k`` (row-major), which is what
:func:`CubicMatrix.flat` and the serializers in :mod:`qsp.formats` use.

Products
--------
- :func:`mul_general`: bilinear extension of a table of structural constants.
- :func:`mul_maksimov0`: ``c_ijr = sum_k a_ijk b_kjr`` (layerwise in j).
- :func:`mul_maksimov_a`: ``c_ijr = sum_{l,n: a(l,n)=j} sum_k a_ilk b_knr``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from qsp.defaults import MAX_DIMENSION, MIN_DIMENSION, STOCH_TOL
from qsp.errors import DomainError

# ---------------------------------------------------------------------------
# Dimension helpers
# ---------------------------------------------------------------------------


def _check_dimension(m: int) -> int:
    if not isinstance(m, (int, np.integer)) or isinstance(m, bool):
        raise DomainError(f"dimension must be an integer, got {m!r}")
    if not MIN_DIMENSION <= m <= MAX_DIMENSION:
        raise DomainError(
            f"dimension must be in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {m}"
        )
    return int(m)


def _check_index(m: int, *indices: int) -> None:
    for idx in indices:
        if not 0 <= idx < m:
            raise DomainError(f"index {idx} out of range for m={m}")


def _frozen(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("entries must be finite (no NaN or infinity)")
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


class SquareMatrix:
    """An immutable ``m x m`` real matrix indexed ``(i, k)``."""

    __slots__ = ("_a",)

    def __init__(self, entries: Sequence[Sequence[float]] | np.ndarray) -> None:
        arr = _frozen(entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DomainError(f"square matrix needs shape (m, m), got {arr.shape}")
        _check_dimension(arr.shape[0])
        self._a = arr

    @classmethod
    def identity(cls, m: int) -> "SquareMatrix":
        return cls(np.eye(_check_dimension(m)))

    @property
    def m(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def __getitem__(self, idx: tuple[int, int]) -> float:
        return float(self._a[idx])

    def __matmul__(self, other: "SquareMatrix") -> "SquareMatrix":
        return compose_square(self, other)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SquareMatrix):
            return np.array_equal(self._a, other._a)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._a.tobytes())

    def __repr__(self) -> str:
        return f"SquareMatrix(m={self.m}, {self._a.tolist()!r})"

    def max_abs_diff(self, other: "SquareMatrix") -> float:
        return float(np.max(np.abs(self._a - other._a)))


class CubicMatrix:
    """An immutable ``m x m x m`` real matrix indexed ``(i, j, k)``."""

    __slots__ = ("_a",)

    def __init__(self, entries: np.ndarray | Sequence, m: int | None = None) -> None:
        arr = np.asarray(entries, dtype=float)
        if m is not None and arr.ndim == 1:
            if arr.size != m ** 3:
                raise DomainError(f"expected {m ** 3} entries for m={m}, got {arr.size}")
            arr = arr.reshape(m, m, m)
        if arr.ndim != 3 or not (arr.shape[0] == arr.shape[1] == arr.shape[2]):
            raise DomainError(f"cubic matrix needs shape (m, m, m), got {arr.shape}")
        _check_dimension(arr.shape[0])
        self._a = _frozen(arr)

    @classmethod
    def zeros(cls, m: int) -> "CubicMatrix":
        m = _check_dimension(m)
        return cls(np.zeros((m, m, m)))

    @classmethod
    def uniform(cls, m: int, value: float) -> "CubicMatrix":
        m = _check_dimension(m)
        return cls(np.full((m, m, m), float(value)))

    @property
    def m(self) -> int:
        return self._a.shape[0]

    @property
    def array(self) -> np.ndarray:
        return self._a

    def flat(self) -> list[float]:
        """Entries in the documented ``i*m*m + j*m + k`` order."""
        return self._a.reshape(-1).tolist()

    def __getitem__(self, idx: tuple[int, int, int]) -> float:
        return float(self._a[idx])

    # --- Vector-space structure -------------------------------------------

    def _same_dim(self, other: "CubicMatrix") -> None:
        if self.m != other.m:
            raise DomainError(f"dimension mismatch: {self.m} vs {other.m}")

    def __add__(self, other: "CubicMatrix") -> "CubicMatrix":
        self._same_dim(other)
        return CubicMatrix(self._a + other._a)

    def __sub__(self, other: "CubicMatrix") -> "CubicMatrix":
        self._same_dim(other)
        return CubicMatrix(self._a - other._a)

    def __mul__(self, scalar: float) -> "CubicMatrix":
        return CubicMatrix(self._a * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "CubicMatrix":
        return CubicMatrix(-self._a)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, CubicMatrix):
            return np.array_equal(self._a, other._a)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._a.tobytes())

    def __repr__(self) -> str:
        return f"CubicMatrix(m={self.m})"

    def max_abs_diff(self, other: "CubicMatrix") -> float:
        self._same_dim(other)
        return float(np.max(np.abs(self._a - other._a)))


def basis(m: int, i: int, j: int, k: int) -> CubicMatrix:
    """The unit matrix E_ijk: a single 1 at ``(i, j, k)``."""
    m = _check_dimension(m)
    _check_index(m, i, j, k)
    arr = np.zeros((m, m, m))
    arr[i, j, k] = 1.0
    return CubicMatrix(arr)


# ---------------------------------------------------------------------------
# Product parameters
# ---------------------------------------------------------------------------


class BinaryOpTable:
    """An associative binary operation ``a: I x I -> I`` given by its table.

    Associativity is checked exhaustively at construction; a table that
    fails is rejected here, never at product time.
    """

    __slots__ = ("_t",)

    def __init__(self, table: Sequence[Sequence[int]] | np.ndarray) -> None:
        t = np.asarray(table)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise DomainError(f"operation table needs shape (m, m), got {t.shape}")
        m = _check_dimension(t.shape[0])
        if not np.issubdtype(t.dtype, np.integer):
            if not np.all(np.equal(np.mod(t, 1), 0)):
                raise DomainError("operation table entries must be integers")
            t = t.astype(int)
        if t.min() < 0 or t.max() >= m:
            raise DomainError(f"operation table values must lie in 0..{m - 1}")
        left = t[t]                                       # a(a(x,y),z)
        right = t[np.arange(m)[:, None, None], t[None, :, :]]  # a(x,a(y,z))
        bad = np.argwhere(left != right)
        if bad.size:
            x, y, z = (int(v) for v in bad[0])
            raise DomainError(
                f"operation is not associative: a(a({x},{y}),{z}) != a({x},a({y},{z}))"
            )
        t = t.copy()
        t.setflags(write=False)
        self._t = t

    @classmethod
    def projection(cls, m: int) -> "BinaryOpTable":
        """The left projection a0(i, j) = i."""
        m = _check_dimension(m)
        return cls(np.repeat(np.arange(m)[:, None], m, axis=1))

    @property
    def m(self) -> int:
        return self._t.shape[0]

    @property
    def table(self) -> np.ndarray:
        return self._t

    def __call__(self, x: int, y: int) -> int:
        return int(self._t[x, y])

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BinaryOpTable):
            return np.array_equal(self._t, other._t)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._t.tobytes())

    def indicator(self) -> np.ndarray:
        """``D[l, n, j] = 1`` iff ``a(l, n) = j``."""
        m = self.m
        d = np.zeros((m, m, m))
        ll, nn = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
        d[ll, nn, self._t] = 1.0
        return d


Index6 = tuple[int, int, int, int, int, int]


@dataclass(frozen=True)
class StructConstants:
    """Sparse structural constants ``C^{uvw}_{ijk,lnr}`` (absent means 0).

    ``coefficients`` maps ``((i,j,k,l,n,r), (u,v,w))`` to a finite real.
    """

    m: int
    coefficients: Mapping[tuple[Index6, tuple[int, int, int]], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_dimension(self.m)
        for (src, dst), value in self.coefficients.items():
            _check_index(self.m, *src, *dst)
            if not np.isfinite(value):
                raise DomainError(f"structural constant {src}->{dst} is not finite")

    @classmethod
    def maksimov0(cls, m: int) -> "StructConstants":
        """``E_ijk *0 E_lnr = delta_kl delta_jn E_ijr``."""
        m = _check_dimension(m)
        coeffs = {}
        for i, j, k, r in itertools.product(range(m), repeat=4):
            coeffs[((i, j, k, k, j, r), (i, j, r))] = 1.0
        return cls(m, coeffs)

    @classmethod
    def maksimov_a(cls, op: BinaryOpTable) -> "StructConstants":
        """``E_ijk *a E_lnr = delta_kl E_{i a(j,n) r}``."""
        m = op.m
        coeffs = {}
        for i, j, k, n, r in itertools.product(range(m), repeat=5):
            coeffs[((i, j, k, k, n, r), (i, op(j, n), r))] = 1.0
        return cls(m, coeffs)

    def items(self) -> Iterable[tuple[tuple[Index6, tuple[int, int, int]], float]]:
        return self.coefficients.items()


# ---------------------------------------------------------------------------
# Products
# ---------------------------------------------------------------------------


def _require_same(a: CubicMatrix, b: CubicMatrix) -> int:
    if a.m != b.m:
        raise DomainError(f"dimension mismatch: {a.m} vs {b.m}")
    return a.m


def mul_general(a: CubicMatrix, b: CubicMatrix, mu: StructConstants) -> CubicMatrix:
    """Bilinear extension of ``E_ijk * E_lnr = sum_uvw C^{uvw}_{ijk,lnr} E_uvw``."""
    m = _require_same(a, b)
    if mu.m != m:
        raise DomainError(f"structural constants have m={mu.m}, matrices m={m}")
    aa, bb = a.array, b.array
    out = np.zeros((m, m, m))
    for (src, dst), coef in mu.items():
        i, j, k, l, n, r = src
        out[dst] += aa[i, j, k] * bb[l, n, r] * coef
    return CubicMatrix(out)


def mul_maksimov0(a: CubicMatrix, b: CubicMatrix) -> CubicMatrix:
    """Maksimov 0-product: ``c_ijr = sum_k a_ijk b_kjr``."""
    _require_same(a, b)
    return CubicMatrix(np.einsum("ijk,kjr->ijr", a.array, b.array))


def mul_maksimov_a(a: CubicMatrix, b: CubicMatrix, op: BinaryOpTable) -> CubicMatrix:
    """Maksimov a-product: ``c_ijr = sum_{l,n: a(l,n)=j} sum_k a_ilk b_knr``."""
    m = _require_same(a, b)
    if op.m != m:
        raise DomainError(f"operation table has m={op.m}, matrices m={m}")
    pairs = np.einsum("ilk,knr->ilnr", a.array, b.array)
    return CubicMatrix(np.einsum("ilnr,lnj->ijr", pairs, op.indicator()))


def compose_square(u: SquareMatrix, v: SquareMatrix) -> SquareMatrix:
    """Ordinary row-by-column product."""
    if u.m != v.m:
        raise DomainError(f"dimension mismatch: {u.m} vs {v.m}")
    return SquareMatrix(u.array @ v.array)


# ---------------------------------------------------------------------------
# Stochasticity
# ---------------------------------------------------------------------------


class StochKind(str, enum.Enum):
    ONE_TWO = "12"
    ONE_THREE = "13"
    TWO_THREE = "23"
    THREE = "3"
    TWICE = "twice"
    LEFT = "left"
    RIGHT = "right"
    DOUBLY = "doubly"

    @property
    def is_cubic(self) -> bool:
        return self in _CUBIC_KINDS


_CUBIC_KINDS = frozenset({
    StochKind.ONE_TWO, StochKind.ONE_THREE, StochKind.TWO_THREE,
    StochKind.THREE, StochKind.TWICE,
})


@dataclass(frozen=True)
class StochCheck:
    """Outcome of a stochasticity predicate.

    ``deviations`` holds ``|sum - target|`` for every defining sum, in the
    order the sums are enumerated (numpy C order of the remaining indices).
    """

    kind: StochKind
    ok: bool
    max_deviation: float
    min_entry: float
    deviations: tuple[float, ...]

    def __bool__(self) -> bool:
        return self.ok


def _cubic_sums(q: np.ndarray, kind: StochKind) -> list[tuple[np.ndarray, float]]:
    m = q.shape[0]
    if kind is StochKind.ONE_TWO:
        return [(q.sum(axis=(0, 1)), 1.0)]
    if kind is StochKind.ONE_THREE:
        return [(q.sum(axis=(0, 2)), 1.0)]
    if kind is StochKind.TWO_THREE:
        return [(q.sum(axis=(1, 2)), 1.0)]
    if kind is StochKind.THREE:
        return [(q.sum(axis=2), 1.0)]
    if kind is StochKind.TWICE:
        return [(q.sum(axis=(1, 2)), 1.0), (q.sum(axis=0), 1.0 / m)]
    raise DomainError(f"{kind.value!r} is not a cubic stochasticity kind")


def is_stochastic(q: CubicMatrix, kind: StochKind, tol: float = STOCH_TOL) -> StochCheck:
    """Check entries >= -tol and every defining sum of *kind* within tol."""
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    arr = q.array
    devs: list[float] = []
    for sums, target in _cubic_sums(arr, kind):
        devs.extend(np.abs(sums - target).reshape(-1).tolist())
    min_entry = float(arr.min())
    max_dev = max(devs)
    ok = min_entry >= -tol and max_dev <= tol
    return StochCheck(kind, ok, max_dev, min_entry, tuple(devs))


def is_square_stochastic(u: SquareMatrix, kind: StochKind, tol: float = STOCH_TOL) -> StochCheck:
    """Right: row sums; Left: column sums; Doubly: both."""
    if kind not in (StochKind.LEFT, StochKind.RIGHT, StochKind.DOUBLY):
        raise DomainError(f"{kind.value!r} is not a square stochasticity kind")
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    arr = u.array
    devs: list[float] = []
    if kind in (StochKind.RIGHT, StochKind.DOUBLY):
        devs.extend(np.abs(arr.sum(axis=1) - 1.0).tolist())
    if kind in (StochKind.LEFT, StochKind.DOUBLY):
        devs.extend(np.abs(arr.sum(axis=0) - 1.0).tolist())
    min_entry = float(arr.min())
    max_dev = max(devs)
    return StochCheck(kind, min_entry >= -tol and max_dev <= tol, max_dev, min_entry, tuple(devs))


def clamp_negative(q: CubicMatrix, tol: float = STOCH_TOL) -> CubicMatrix:
    """Set entries in ``[-tol, 0)`` to zero; anything lower is an error.

    Never applied implicitly by the library.
    """
    arr = q.array
    if arr.min() < -tol:
        idx = tuple(int(v) for v in np.unravel_index(np.argmin(arr), arr.shape))
        raise DomainError(f"entry {idx} = {arr[idx]!r} is below -{tol}")
    return CubicMatrix(np.where(arr < 0.0, 0.0, arr))


# ---------------------------------------------------------------------------
# Slices and contraction
# ---------------------------------------------------------------------------


def contract_second(q: CubicMatrix) -> SquareMatrix:
    """``c_ik = sum_j P_ijk``."""
    return SquareMatrix(q.array.sum(axis=1))


def slice_second(q: CubicMatrix, j: int) -> SquareMatrix:
    """The j-th layer ``(P_ijk)_{i,k}``."""
    _check_index(q.m, j)
    return SquareMatrix(q.array[:, j, :])


def slice_first(q: CubicMatrix, i: int) -> SquareMatrix:
    """The block ``(q_ijk)_{j,k}``."""
    _check_index(q.m, i)
    return SquareMatrix(q.array[i, :, :])


def assemble_from_second_slices(layers: Sequence[SquareMatrix]) -> CubicMatrix:
    """Inverse of :func:`slice_second`: layer j becomes ``P[:, j, :]``."""
    if not layers:
        raise DomainError("at least one layer is required")
    m = layers[0].m
    if len(layers) != m or any(layer.m != m for layer in layers):
        raise DomainError(f"need exactly {m} layers of dimension {m}")
    return CubicMatrix(np.stack([layer.array for layer in layers], axis=1))


# ---------------------------------------------------------------------------
# Random generators
# ---------------------------------------------------------------------------


def _random_doubly(m: int, rng: np.random.Generator) -> np.ndarray:
    """Convex combination of random permutation matrices (Birkhoff)."""
    weights = rng.dirichlet(np.ones(m))
    out = np.zeros((m, m))
    eye = np.eye(m)
    for w in weights:
        out += w * eye[rng.permutation(m)]
    return out


def random_square(m: int, kind: StochKind, rng: np.random.Generator) -> SquareMatrix:
    m = _check_dimension(m)
    if kind is StochKind.RIGHT:
        return SquareMatrix(rng.dirichlet(np.ones(m), size=m))
    if kind is StochKind.LEFT:
        return SquareMatrix(rng.dirichlet(np.ones(m), size=m).T)
    if kind is StochKind.DOUBLY:
        return SquareMatrix(_random_doubly(m, rng))
    raise DomainError(f"{kind.value!r} is not a square stochasticity kind")


def random_cubic(m: int, kind: StochKind, rng: np.random.Generator) -> CubicMatrix:
    """A random nonnegative cubic matrix that is stochastic in the sense *kind*."""
    m = _check_dimension(m)
    ones = np.ones(m * m)
    if kind is StochKind.THREE:
        return CubicMatrix(rng.dirichlet(np.ones(m), size=(m, m)))
    if kind is StochKind.ONE_TWO:
        return CubicMatrix(rng.dirichlet(ones, size=m).T.reshape(m, m, m))
    if kind is StochKind.TWO_THREE:
        return CubicMatrix(rng.dirichlet(ones, size=m).reshape(m, m, m))
    if kind is StochKind.ONE_THREE:
        return CubicMatrix(rng.dirichlet(ones, size=m).reshape(m, m, m).transpose(1, 0, 2))
    if kind is StochKind.TWICE:
        # p_ijk = S_j[i, k] / m with every S_j doubly stochastic
        blocks = np.stack([_random_doubly(m, rng) for _ in range(m)], axis=1)
        return CubicMatrix(blocks / m)
    raise DomainError(f"{kind.value!r} is not a cubic stochasticity kind")


def maksimov_a0_oracle(a: CubicMatrix, b: CubicMatrix) -> CubicMatrix:
    """Brute-force ``c_ijr = sum_k sum_n a_ijk b_knr`` with explicit loops.

    Independent of :func:`mul_maksimov_a`; used to cross-check it.
    """
    m = _require_same(a, b)
    aa, bb = a.array, b.array
    out = np.zeros((m, m, m))
    for i, j, r in itertools.product(range(m), repeat=3):
        total = 0.0
        for k in range(m):
            for n in range(m):
                total += aa[i, j, k] * bb[k, n, r]
        out[i, j, r] = total
    return CubicMatrix(out)
