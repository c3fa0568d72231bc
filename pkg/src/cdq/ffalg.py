"""Exact linear algebra over a prime field F_p.

Matrices are immutable numpy-backed values.  Besides the single-matrix
operations (row reduction, kernels, inverses, powers) the module offers
batched rank kernels used by the exhaustive subspace scans, with a
bit-packed fast path for p = 2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ValidationError

MAX_PRIME = 1 << 16
# Stacked per-slice systems (m * dim U rows, 2 n^2 unknowns) exceed 64,
# so the matrix cap is looser than the ambient-dimension cap.
MAX_MATRIX_DIM = 4096
MAX_AMBIENT_DIM = 64


@lru_cache(maxsize=None)
def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    q = 3
    while q * q <= p:
        if p % q == 0:
            return False
        q += 2
    return True


def check_prime(p: int) -> int:
    p = int(p)
    if not is_prime(p):
        raise ValidationError(f"p={p} is not prime")
    if p >= MAX_PRIME:
        raise CapacityError(f"p={p} exceeds the supported bound p < 2^16")
    return p


@lru_cache(maxsize=None)
def inverse_table(p: int) -> np.ndarray:
    """inv[x] = x^-1 mod p, with inv[0] = 0."""
    inv = np.zeros(p, dtype=np.int64)
    for x in range(1, p):
        inv[x] = pow(x, -1, p)
    inv.setflags(write=False)
    return inv


@dataclass(frozen=True)
class Fp:
    """A residue mod a prime."""

    p: int
    value: int

    def __post_init__(self):
        check_prime(self.p)
        object.__setattr__(self, "value", int(self.value) % self.p)

    def _coerce(self, other) -> int:
        if isinstance(other, Fp):
            if other.p != self.p:
                raise ValidationError("mixing residues of different primes")
            return other.value
        return int(other)

    def __add__(self, other):
        return Fp(self.p, self.value + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Fp(self.p, self.value - self._coerce(other))

    def __rsub__(self, other):
        return Fp(self.p, self._coerce(other) - self.value)

    def __mul__(self, other):
        return Fp(self.p, self.value * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Fp(self.p, -self.value)

    def __pow__(self, k: int):
        return Fp(self.p, pow(self.value, k, self.p))

    def inverse(self) -> Fp:
        if self.value == 0:
            raise ZeroDivisionError("0 has no inverse mod p")
        return Fp(self.p, pow(self.value, -1, self.p))

    def __truediv__(self, other):
        return self * Fp(self.p, self._coerce(other)).inverse()

    def __int__(self):
        return self.value

    def is_square(self) -> bool:
        if self.value == 0 or self.p == 2:
            return True
        return pow(self.value, (self.p - 1) // 2, self.p) == 1


class FpMatrix:
    """Immutable matrix over F_p."""

    __slots__ = ("p", "_a")

    def __init__(self, entries, p: int, shape: tuple[int, int] | None = None):
        p = check_prime(p)
        a = np.array(entries, dtype=np.int64)
        if shape is not None:
            a = a.reshape(shape)
        elif a.ndim == 1 and a.size == 0:
            a = a.reshape(0, 0)
        if a.ndim != 2:
            raise ValidationError(f"matrix entries must be 2-dimensional, got shape {a.shape}")
        if max(a.shape) > MAX_MATRIX_DIM:
            raise CapacityError(
                f"matrix {a.shape[0]}x{a.shape[1]} exceeds the {MAX_MATRIX_DIM} row/column cap"
            )
        a %= p
        a.setflags(write=False)
        self.p = p
        self._a = a

    # construction helpers
    @classmethod
    def _wrap(cls, a: np.ndarray, p: int) -> FpMatrix:
        """Adopt an already-reduced int64 array without copying or checks."""
        out = cls.__new__(cls)
        a = np.ascontiguousarray(a, dtype=np.int64)
        a.setflags(write=False)
        out.p = p
        out._a = a
        return out

    @classmethod
    def zeros(cls, rows: int, cols: int, p: int) -> FpMatrix:
        return cls(np.zeros((rows, cols), dtype=np.int64), p)

    @classmethod
    def identity(cls, n: int, p: int) -> FpMatrix:
        return cls(np.eye(n, dtype=np.int64), p)

    @classmethod
    def block_diag(cls, blocks: Sequence[FpMatrix]) -> FpMatrix:
        p = blocks[0].p
        rows = sum(b.rows for b in blocks)
        cols = sum(b.cols for b in blocks)
        a = np.zeros((rows, cols), dtype=np.int64)
        i = j = 0
        for b in blocks:
            a[i : i + b.rows, j : j + b.cols] = b.array
            i += b.rows
            j += b.cols
        return cls._wrap(a, p)

    # basic accessors
    @property
    def array(self) -> np.ndarray:
        return self._a

    @property
    def rows(self) -> int:
        return self._a.shape[0]

    @property
    def cols(self) -> int:
        return self._a.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._a.shape

    @property
    def T(self) -> FpMatrix:
        return FpMatrix._wrap(self._a.T, self.p)

    def tolist(self) -> list[list[int]]:
        return self._a.tolist()

    def __getitem__(self, idx):
        return self._a[idx]

    def __repr__(self):
        return f"FpMatrix(p={self.p}, {self.tolist()})"

    def __eq__(self, other):
        if not isinstance(other, FpMatrix):
            return NotImplemented
        return self.p == other.p and self.shape == other.shape and np.array_equal(self._a, other._a)

    def __hash__(self):
        return hash((self.p, self.shape, self._a.tobytes()))

    def _check(self, other: FpMatrix):
        if other.p != self.p:
            raise ValidationError("matrices over different primes")

    # arithmetic
    def __add__(self, other: FpMatrix) -> FpMatrix:
        self._check(other)
        return FpMatrix._wrap((self._a + other._a) % self.p, self.p)

    def __sub__(self, other: FpMatrix) -> FpMatrix:
        self._check(other)
        return FpMatrix._wrap((self._a - other._a) % self.p, self.p)

    def __neg__(self) -> FpMatrix:
        return FpMatrix._wrap((-self._a) % self.p, self.p)

    def __mul__(self, scalar: int) -> FpMatrix:
        return FpMatrix._wrap((self._a * (int(scalar) % self.p)) % self.p, self.p)

    __rmul__ = __mul__

    def __matmul__(self, other: FpMatrix) -> FpMatrix:
        self._check(other)
        if self.cols != other.rows:
            raise ValidationError(f"cannot multiply {self.shape} by {other.shape}")
        return FpMatrix._wrap(_matmul(self._a, other._a, self.p), self.p)

    def __pow__(self, k: int) -> FpMatrix:
        if self.rows != self.cols:
            raise ValidationError("only square matrices have powers")
        if k < 0:
            return self.inverse() ** (-k)
        result = np.eye(self.rows, dtype=np.int64)
        base = self._a
        while k:
            if k & 1:
                result = _matmul(result, base, self.p)
            base = _matmul(base, base, self.p)
            k >>= 1
        return FpMatrix._wrap(result, self.p)

    def is_zero(self) -> bool:
        return not self._a.any()

    def is_identity(self) -> bool:
        return self.rows == self.cols and np.array_equal(self._a, np.eye(self.rows, dtype=np.int64))

    def is_symmetric(self) -> bool:
        return self.rows == self.cols and np.array_equal(self._a, self._a.T)

    # elimination
    def rref(self) -> tuple[FpMatrix, tuple[int, ...], int]:
        r, pivots = _rref_array(self._a, self.p)
        return FpMatrix._wrap(r, self.p), pivots, len(pivots)

    @property
    def rank(self) -> int:
        return len(_rref_array(self._a, self.p)[1])

    def kernel(self) -> list[np.ndarray]:
        """Null-space basis, one vector per free column in ascending order."""
        r, pivots = _rref_array(self._a, self.p)
        free = [c for c in range(self.cols) if c not in set(pivots)]
        out = []
        for f in free:
            v = np.zeros(self.cols, dtype=np.int64)
            v[f] = 1
            for row, c in enumerate(pivots):
                v[c] = (-r[row, f]) % self.p
            out.append(v)
        return out

    def kernel_matrix(self) -> FpMatrix:
        vecs = self.kernel()
        if not vecs:
            return FpMatrix.zeros(0, self.cols, self.p)
        return FpMatrix._wrap(np.array(vecs), self.p)

    def inverse(self) -> FpMatrix:
        n = self.rows
        if n != self.cols:
            raise ValidationError("only square matrices are invertible")
        aug = np.concatenate([self._a, np.eye(n, dtype=np.int64)], axis=1)
        r, pivots = _rref_array(aug, self.p)
        if pivots[:n] != tuple(range(n)):
            raise ZeroDivisionError("matrix is singular")
        return FpMatrix._wrap(r[:, n:], self.p)

    def is_invertible(self) -> bool:
        return self.rows == self.cols and self.rank == self.rows

    def solve_left(self, target: FpMatrix) -> FpMatrix | None:
        """X with X @ self = target, or None when no solution exists."""
        # X A = T  <=>  A^T X^T = T^T
        sol = _solve(self._a.T, target._a.T, self.p)
        return None if sol is None else FpMatrix._wrap(sol.T, self.p)


def _matmul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    # p < 2^16 and inner dimension <= 4096 keep partial sums below 2^44
    return (a @ b) % p


def _rref_array(a: np.ndarray, p: int) -> tuple[np.ndarray, tuple[int, ...]]:
    m = np.array(a, dtype=np.int64) % p
    rows, cols = m.shape
    inv = inverse_table(p)
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + nz[0]
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = (m[r] * inv[m[r, c]]) % p
        col = m[:, c].copy()
        col[r] = 0
        nzr = np.nonzero(col)[0]
        if nzr.size:
            m[nzr] = (m[nzr] - np.outer(col[nzr], m[r])) % p
        pivots.append(c)
        r += 1
    return m, tuple(pivots)


def _solve(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray | None:
    """A particular solution X of A X = B (B may have several columns)."""
    n = a.shape[1]
    aug = np.concatenate([a, b], axis=1)
    r, pivots = _rref_array(aug, p)
    if any(c >= n for c in pivots):
        return None
    x = np.zeros((n, b.shape[1]), dtype=np.int64)
    for row, c in enumerate(pivots):
        x[c] = r[row, n:]
    return x


def rref(m: FpMatrix) -> tuple[FpMatrix, tuple[int, ...], int]:
    return m.rref()


def kernel(m: FpMatrix) -> list[np.ndarray]:
    return m.kernel()


def rank(m: FpMatrix) -> int:
    return m.rank


# ---------------------------------------------------------------------------
# polynomials


@dataclass(frozen=True)
class FpPoly:
    """Polynomial over F_p with coefficients stored low-to-high."""

    p: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        check_prime(self.p)
        c = [int(x) % self.p for x in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def from_k(cls, p: int, ks: Sequence[int]) -> FpPoly:
        """x^a - k_{a-1} x^{a-1} - ... - k_1 x - k_0 from (k_0, ..., k_{a-1})."""
        return cls(p, tuple(-k for k in ks) + (1,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_monic(self) -> bool:
        return bool(self.coeffs) and self.coeffs[-1] == 1

    @property
    def ks(self) -> tuple[int, ...]:
        """The k_i of the monic form x^a - sum k_i x^i."""
        return tuple((-c) % self.p for c in self.coeffs[:-1])

    def __call__(self, x):
        if isinstance(x, FpMatrix):
            acc = FpMatrix.zeros(x.rows, x.cols, self.p)
            eye = FpMatrix.identity(x.rows, self.p)
            for c in reversed(self.coeffs):
                acc = acc @ x + eye * c
            return acc
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * x + c) % self.p
        return acc

    def __mod__(self, other: FpPoly) -> FpPoly:
        if other.degree < 0:
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        lead_inv = pow(other.coeffs[-1], -1, self.p)
        while len(rem) - 1 >= other.degree and rem:
            shift = len(rem) - 1 - other.degree
            q = rem[-1] * lead_inv % self.p
            for i, c in enumerate(other.coeffs):
                rem[shift + i] = (rem[shift + i] - q * c) % self.p
            while rem and rem[-1] == 0:
                rem.pop()
        return FpPoly(self.p, tuple(rem))

    def is_irreducible(self) -> bool:
        """Trial division by every monic polynomial of degree <= deg/2."""
        if self.degree < 1:
            return False
        for k in range(1, self.degree // 2 + 1):
            for low in itertools.product(range(self.p), repeat=k):
                if (self % FpPoly(self.p, low + (1,))).degree < 0:
                    return False
        return True

    def __str__(self):
        terms = []
        for i, c in reversed(list(enumerate(self.coeffs))):
            if c == 0:
                continue
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            coef = str(c) if (c != 1 or i == 0) else ""
            terms.append(coef + mono)
        return " + ".join(terms) or "0"


def companion_matrix(poly: FpPoly) -> FpMatrix:
    """Frobenius form: ones on the subdiagonal, B[i][a-1] = k_i."""
    if not poly.is_monic():
        raise ValidationError(f"companion matrix needs a monic polynomial, got {poly}")
    a = poly.degree
    if a < 1:
        raise ValidationError("companion matrix needs degree >= 1")
    b = np.zeros((a, a), dtype=np.int64)
    for i in range(a - 1):
        b[i + 1, i] = 1
    b[:, a - 1] = poly.ks
    return FpMatrix(b, poly.p)


def minimal_polynomial(m: FpMatrix) -> FpPoly:
    """First linear dependency among I, M, M^2, ... (Krylov on the matrix space)."""
    if m.rows != m.cols:
        raise ValidationError("minimal polynomial needs a square matrix")
    p, n = m.p, m.rows
    powers = [np.eye(n, dtype=np.int64).ravel()]
    acc = np.eye(n, dtype=np.int64)
    for deg in range(1, n + 1):
        acc = _matmul(acc, m.array, p)
        target = acc.ravel()
        sol = _solve(np.array(powers).T, target[:, None], p)
        if sol is not None:
            # M^deg = sum c_i M^i
            return FpPoly(p, tuple(-int(c) for c in sol[:, 0]) + (1,))
        powers.append(target)
    raise RuntimeError("no dependency up to degree n, Cayley-Hamilton violated")


def matrix_order(m: FpMatrix) -> int | None:
    """Multiplicative order of a square matrix; None if it is singular."""
    if m.rows != m.cols:
        raise ValidationError("matrix order needs a square matrix")
    if not m.is_invertible():
        return None
    cap = m.p ** m.rows - 1
    eye = np.eye(m.rows, dtype=np.int64)
    acc = m.array
    k = 1
    while not np.array_equal(acc, eye):
        k += 1
        if k > cap:
            raise RuntimeError(f"order of {m} exceeds p^n - 1 = {cap}")
        acc = _matmul(acc, m.array, m.p)
    return k


def find_primitive_polynomial(p: int, a: int) -> FpPoly:
    """Lexicographically first (k_0 fastest) x^a - sum k_i x^i of full order."""
    p = check_prime(p)
    if a < 1:
        raise ValidationError("degree must be >= 1")
    target = p**a - 1
    for ks_rev in itertools.product(range(p), repeat=a):
        ks = tuple(reversed(ks_rev))
        if ks[0] == 0:
            continue
        poly = FpPoly.from_k(p, ks)
        if matrix_order(companion_matrix(poly)) == target:
            return poly
    raise RuntimeError(f"no primitive polynomial of degree {a} over F_{p}")


# ---------------------------------------------------------------------------
# batched kernels


def batch_rank(mats: np.ndarray, p: int) -> np.ndarray:
    """Rank of each matrix in an (N, R, C) stack over F_p."""
    mats = np.asarray(mats)
    if mats.ndim != 3:
        raise ValidationError("batch_rank expects an (N, R, C) array")
    n, r, c = mats.shape
    if n == 0 or r == 0 or c == 0:
        return np.zeros(n, dtype=np.int64)
    if p == 2 and c <= 64:
        return batch_rank_gf2(pack_rows(mats), c)
    return batch_rank_generic(mats, p)


def batch_rank_generic(mats: np.ndarray, p: int) -> np.ndarray:
    a = np.array(mats, dtype=np.int64) % p
    n, r, c = a.shape
    inv = inverse_table(p)
    ar = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    for j in range(c):
        sub = a[:, :, j:]
        col = sub[:, :, 0]
        nz = col != 0
        found = nz.any(axis=1)
        if not found.any():
            continue
        piv = nz.argmax(axis=1)
        prow = sub[ar, piv]
        prow = prow * inv[prow[:, 0]][:, None] % p
        # the pivot row cancels itself, the rest lose column j
        sub -= col[:, :, None] * prow[:, None, :]
        sub %= p
        rank += found
    return rank


def pack_rows(mats: np.ndarray) -> np.ndarray:
    """(N, R, C) 0/1 array -> (N, R) uint64, column j at bit j."""
    c = mats.shape[2]
    weights = np.left_shift(np.uint64(1), np.arange(c, dtype=np.uint64))
    return (np.asarray(mats, dtype=np.uint64) & np.uint64(1)) @ weights if c else np.zeros(
        mats.shape[:2], dtype=np.uint64
    )


def batch_rank_gf2(rows: np.ndarray, ncols: int) -> np.ndarray:
    a = np.array(rows, dtype=np.uint64)
    n = a.shape[0]
    ar = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    zero = np.uint64(0)
    for j in range(ncols):
        bit = np.uint64(1 << j)
        has = (a & bit) != zero
        found = has.any(axis=1)
        if not found.any():
            continue
        piv = has.argmax(axis=1)
        prow = np.where(found, a[ar, piv], zero)
        a ^= np.where(has, prow[:, None], zero)
        rank += found
    return rank


def gaussian_binomial(d: int, k: int, p: int) -> int:
    if k < 0 or k > d:
        return 0
    num = den = 1
    for i in range(k):
        num *= p ** (d - i) - 1
        den *= p ** (i + 1) - 1
    return num // den


def subspace_count(p: int, d: int) -> int:
    return sum(gaussian_binomial(d, k, p) for k in range(d + 1))


def vectors(p: int, n: int) -> Iterable[tuple[int, ...]]:
    return itertools.product(range(p), repeat=n)


def projective_points(p: int, n: int) -> np.ndarray:
    """One representative per line of F_p^n: first nonzero coordinate 1."""
    out = []
    for lead in range(n):
        for tail in itertools.product(range(p), repeat=n - lead - 1):
            out.append((0,) * lead + (1,) + tail)
    return np.array(out, dtype=np.int64).reshape(len(out), n)
