"""W-valued alternating forms on V = F_p^d and canonical subspaces of V.

A class-2 p-group with G/Z(G) and G' elementary abelian is recorded by
its commutator pairing b: V x V -> W = F_p^m.  The pairing is stored as m
scalar "slices", slice s holding the s-th W-coordinate of b(e_i, e_j).
Subgroups containing Z(G) correspond to subspaces of V and centralizers
to perps under b.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from .errors import CapacityError, RadicalError, ValidationError
from .ffalg import (
    MAX_AMBIENT_DIM,
    FpMatrix,
    _rref_array,
    batch_rank,
    check_prime,
    subspace_count,
)

FORM_VERSION = 1


class Subspace:
    """Subspace of F_p^d held by its reduced row echelon basis.

    Two subspaces are equal exactly when their bases are identical, so the
    basis doubles as the hash key.
    """

    __slots__ = ("p", "d", "basis", "pivots")

    def __init__(self, p: int, d: int, rows=None):
        self.p = p
        self.d = d
        if rows is None:
            a = np.zeros((0, d), dtype=np.int64)
        else:
            a = np.array(rows, dtype=np.int64).reshape(-1, d)
        r, pivots = _rref_array(a, p)
        r = r[: len(pivots)]
        r.setflags(write=False)
        self.basis = r
        self.pivots = pivots

    @classmethod
    def _from_rref(cls, p: int, d: int, basis: np.ndarray, pivots: tuple[int, ...]) -> Subspace:
        out = cls.__new__(cls)
        out.p, out.d = p, d
        basis = np.ascontiguousarray(basis, dtype=np.int64)
        basis.setflags(write=False)
        out.basis, out.pivots = basis, tuple(pivots)
        return out

    @classmethod
    def zero(cls, p: int, d: int) -> Subspace:
        return cls(p, d)

    @classmethod
    def whole(cls, p: int, d: int) -> Subspace:
        return cls(p, d, np.eye(d, dtype=np.int64))

    @classmethod
    def coordinate(cls, p: int, d: int, indices) -> Subspace:
        """Span of the standard basis vectors e_i for i in indices."""
        idx = list(indices)
        rows = np.zeros((len(idx), d), dtype=np.int64)
        rows[np.arange(len(idx)), idx] = 1
        return cls(p, d, rows)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def free_values(self) -> tuple[int, ...]:
        """Entries of the basis outside pivot columns, right of each pivot, row-major."""
        piv = set(self.pivots)
        out = []
        for row, c in enumerate(self.pivots):
            out.extend(int(self.basis[row, j]) for j in range(c + 1, self.d) if j not in piv)
        return tuple(out)

    def sort_key(self) -> tuple:
        return (self.dim, self.pivots, self.free_values())

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return (
            self.p == other.p
            and self.d == other.d
            and self.basis.shape == other.basis.shape
            and np.array_equal(self.basis, other.basis)
        )

    def __hash__(self):
        return hash((self.p, self.d, self.basis.shape, self.basis.tobytes()))

    def __lt__(self, other: Subspace):
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        return f"Subspace(p={self.p}, d={self.d}, basis={self.basis.tolist()})"

    def _same_ambient(self, other: Subspace):
        if (self.p, self.d) != (other.p, other.d):
            raise ValidationError(
                f"ambient mismatch: F_{self.p}^{self.d} vs F_{other.p}^{other.d}"
            )

    def __add__(self, other: Subspace) -> Subspace:
        self._same_ambient(other)
        return Subspace(self.p, self.d, np.concatenate([self.basis, other.basis]))

    def __and__(self, other: Subspace) -> Subspace:
        self._same_ambient(other)
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.p, self.d)
        # l A = mu B  <=>  (l, -mu) [A; B] = 0
        stacked = FpMatrix(np.concatenate([self.basis, other.basis]).T, self.p)
        coeffs = [v[: self.dim] for v in stacked.kernel()]
        if not coeffs:
            return Subspace.zero(self.p, self.d)
        return Subspace(self.p, self.d, np.array(coeffs) @ self.basis % self.p)

    def __le__(self, other: Subspace) -> bool:
        """Containment test."""
        self._same_ambient(other)
        if self.dim > other.dim:
            return False
        if self.dim == 0:
            return True
        return (other + self).dim == other.dim

    def contains_vector(self, v) -> bool:
        return (self + Subspace(self.p, self.d, [v])).dim == self.dim

    def to_json(self) -> dict:
        return {"dim": self.dim, "basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, p: int, d: int, obj: dict) -> Subspace:
        return cls(p, d, obj["basis"] if obj["basis"] else None)


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True, eq=False)
class AlternatingForm:
    """b(e_i, e_j)_s = slices[s, i, j]; meta carries family parameters."""

    p: int
    d: int
    m: int
    slices: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        p = check_prime(self.p)
        if self.d > MAX_AMBIENT_DIM:
            raise CapacityError(f"d={self.d} exceeds the ambient cap {MAX_AMBIENT_DIM}")
        s = np.array(self.slices, dtype=np.int64)
        if s.size == 0:
            s = s.reshape(self.m, self.d, self.d)
        if s.shape != (self.m, self.d, self.d):
            raise ValidationError(
                f"slices have shape {s.shape}, expected ({self.m}, {self.d}, {self.d})"
            )
        s %= p
        s.setflags(write=False)
        object.__setattr__(self, "slices", s)

    def __eq__(self, other):
        if not isinstance(other, AlternatingForm):
            return NotImplemented
        return (self.p, self.d, self.m) == (other.p, other.d, other.m) and np.array_equal(
            self.slices, other.slices
        )

    __hash__ = None

    @property
    def n(self) -> int:
        return self.d // 2

    def pair(self, u, v) -> np.ndarray:
        """The W-vector b(u, v)."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        return np.einsum("i,sij,j->s", u, self.slices, v) % self.p

    def gram(self, a, b) -> np.ndarray:
        """(m, ra, rb) array of b(a_i, b_j) for row-vector stacks a, b."""
        a = np.asarray(a, dtype=np.int64).reshape(-1, self.d)
        b = np.asarray(b, dtype=np.int64).reshape(-1, self.d)
        return np.einsum("id,sde,je->sij", a, self.slices, b) % self.p

    def stacked(self, rows) -> np.ndarray:
        """(m * r, d) matrix whose kernel is the perp of the row span."""
        rows = np.asarray(rows, dtype=np.int64).reshape(-1, self.d)
        return (np.einsum("id,sde->sie", rows, self.slices) % self.p).reshape(-1, self.d)

    @cached_property
    def _slice_matrix(self) -> np.ndarray:
        """(d, m d) float view with column block s holding slice s."""
        return self.slices.transpose(1, 0, 2).reshape(self.d, self.m * self.d).astype(np.float64)

    @cached_property
    def radical_dim(self) -> int:
        return FpMatrix(self.stacked(np.eye(self.d, dtype=np.int64)), self.p).kernel_matrix().rows

    # serialization
    def to_json(self) -> dict:
        return {
            "version": FORM_VERSION,
            "p": self.p,
            "d": self.d,
            "m": self.m,
            "slices": self.slices.tolist(),
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> AlternatingForm:
        if obj.get("version") != FORM_VERSION:
            raise ValidationError(f"unsupported form file version {obj.get('version')!r}")
        for key in ("p", "d", "m", "slices"):
            if key not in obj:
                raise ValidationError(f"form file lacks {key!r}")
        return cls(int(obj["p"]), int(obj["d"]), int(obj["m"]), obj["slices"], dict(obj.get("meta") or {}))

    @classmethod
    def loads(cls, text: str) -> AlternatingForm:
        return cls.from_json(json.loads(text))

    def change_basis(self, t) -> AlternatingForm:
        """The same pairing written in the basis given by the rows of t."""
        t = np.asarray(t, dtype=np.int64)
        s = np.einsum("id,sde,je->sij", t, self.slices, t) % self.p
        return AlternatingForm(self.p, self.d, self.m, s, dict(self.meta))


@dataclass(frozen=True)
class ValidationReport:
    alternating: bool
    spans_W: bool
    radical_dim: int

    @property
    def ok(self) -> bool:
        return self.alternating and self.spans_W and self.radical_dim == 0


def validate_form(f: AlternatingForm) -> ValidationReport:
    s = f.slices
    alternating = bool(
        np.array_equal((s + s.transpose(0, 2, 1)) % f.p, np.zeros_like(s))
        and not np.diagonal(s, axis1=1, axis2=2).any()
    )
    values = s.reshape(f.m, -1).T
    spans = FpMatrix(values, f.p).rank == f.m if f.m else True
    return ValidationReport(alternating, bool(spans), f.radical_dim)


def _check_subspace(f: AlternatingForm, u: Subspace):
    if (u.p, u.d) != (f.p, f.d):
        raise ValidationError(f"subspace of F_{u.p}^{u.d} used with a form on F_{f.p}^{f.d}")


def perp(f: AlternatingForm, u: Subspace) -> Subspace:
    """{v : b(u, v) = 0 for all u in U}."""
    _check_subspace(f, u)
    if u.dim == 0:
        return Subspace.whole(f.p, f.d)
    ker = FpMatrix(f.stacked(u.basis), f.p).kernel()
    return Subspace(f.p, f.d, np.array(ker) if ker else None)


def is_isotropic(f: AlternatingForm, u: Subspace) -> bool:
    _check_subspace(f, u)
    if u.dim <= 1:
        return True
    return not f.gram(u.basis, u.basis).any()


def require_zero_radical(f: AlternatingForm):
    if f.radical_dim:
        raise RadicalError(
            f"form has a radical of dimension {f.radical_dim}; quotient it out before measuring"
        )


def measure_exponent(f: AlternatingForm, u: Subspace) -> int:
    """log_p |H| |C_G(H)| for the preimage H of U: 2m + dim U + dim perp(U)."""
    require_zero_radical(f)
    return 2 * f.m + u.dim + perp(f, u).dim


def batch_measure_exponents(f: AlternatingForm, bases: np.ndarray, dims=None) -> np.ndarray:
    """Measure exponents for an (N, k, d) stack of spanning sets.

    Rows may be dependent (sampling); pass dims=None and the span
    dimension is computed here.
    """
    bases = np.asarray(bases, dtype=np.int64)
    n, k, d = bases.shape
    if k == 0:
        return np.full(n, 2 * f.m + d, dtype=np.int64)
    if dims is None:
        dims = batch_rank(bases, f.p)
    ranks = batch_rank(_stack_rows(f, bases), f.p)
    return 2 * f.m + dims + (d - ranks)


def _stack_rows(f: AlternatingForm, bases: np.ndarray) -> np.ndarray:
    # float64 products are exact: d * p^2 < 2^53 inside the envelope
    n, k, d = bases.shape
    flat = bases.reshape(n * k, d).astype(np.float64) @ f._slice_matrix
    return (flat.astype(np.int64) % f.p).reshape(n, k * f.m, d)


# ---------------------------------------------------------------------------
# enumeration


def pivot_patterns(d: int, k: int) -> Iterator[tuple[tuple[int, ...], list[tuple[int, int]]]]:
    """Pivot column sets in lexicographic order with their free positions."""
    for pivots in itertools.combinations(range(d), k):
        piv = set(pivots)
        free = [(row, j) for row, c in enumerate(pivots) for j in range(c + 1, d) if j not in piv]
        yield pivots, free


def pattern_batches(p: int, d: int, pivots, free, chunk: int = 1 << 15) -> Iterator[np.ndarray]:
    """All RREF bases with the given pivots, as (N, k, d) arrays, in order."""
    k = len(pivots)
    template = np.zeros((k, d), dtype=np.int64)
    template[np.arange(k), list(pivots)] = 1
    f = len(free)
    total = p**f
    rows = np.array([r for r, _ in free], dtype=np.int64)
    cols = np.array([c for _, c in free], dtype=np.int64)
    place = p ** np.arange(f - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        batch = np.broadcast_to(template, (idx.size, k, d)).copy()
        if f:
            digits = (idx[:, None] // place[None, :]) % p
            batch[:, rows, cols] = digits
        yield batch


def enumerate_subspaces(p: int, d: int, cap: int | None = None) -> Iterator[Subspace]:
    """Every subspace of F_p^d once, ordered by dimension, pivots, free entries."""
    total = subspace_count(p, d)
    if cap is not None and total > cap:
        raise CapacityError(f"F_{p}^{d} has {total} subspaces, above the cap {cap}", total)
    for k in range(d + 1):
        for pivots, free in pivot_patterns(d, k):
            for batch in pattern_batches(p, d, pivots, free):
                for basis in batch:
                    yield Subspace._from_rref(p, d, basis, pivots)


# ---------------------------------------------------------------------------
# B-orbit blocks


def orbit_block(b: FpMatrix, first_row: np.ndarray, step: int = 1) -> np.ndarray:
    """(m, a, a) block with row k equal to first_row @ B^{(k-1) step}.

    first_row is an (m, a) array: the a W-vectors of the first row, one
    slice per W-coordinate.
    """
    a = b.rows
    first = np.asarray(first_row, dtype=np.int64) % b.p
    out = np.zeros((first.shape[0], a, a), dtype=np.int64)
    mult = b**step
    power = FpMatrix.identity(a, b.p)
    for k in range(a):
        out[:, k, :] = first @ power.array % b.p
        power = power @ mult
    return out


def commuting_block_is_symmetric(b: FpMatrix, zblock: np.ndarray) -> bool:
    """Whether B^T Z = Z B (slice-wise) implies Z^T = Z for this block."""
    z = np.asarray(zblock, dtype=np.int64) % b.p
    if z.ndim == 2:
        z = z[None]
    bt = b.T.array
    commutes = all(
        np.array_equal(bt @ zs % b.p, zs @ b.array % b.p) for zs in z
    )
    symmetric = np.array_equal(z, z.transpose(0, 2, 1))
    return (not commutes) or symmetric
