"""The four explicit class-2 families with quasi-antichain CD lattices.

Every family lives on V = F_p^{2n}, n = a r, with ordered basis
x_1..x_n, y_1..y_n split into r blocks of size a.  B is the companion
matrix of a primitive polynomial of degree a, so {0} and the powers of B
form the field with p^a elements.

  1. x-x and y-y commute; cross blocks Z_uv built from a fresh first row
     by the rule row_k = row_1 B^{k-1}, Z_vu = Z_uv^T.
  2. as 1 with Z_uu = 0 and the rule row_k = row_1 B^{(k-1) p^b}, a = 2b.
  3. x-y commute; x-x blocks A_uv (u < v) by the B^{k-1} rule, y-y = -A.
  4. as 3 with y-y = -nu A for a quadratic non-residue nu.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FamilyError
from .ffalg import FpPoly, check_prime, companion_matrix, find_primitive_polynomial
from .formspace import AlternatingForm, orbit_block


def quadratic_nonresidue(p: int) -> int:
    p = check_prime(p)
    if p == 2:
        raise FamilyError("every residue mod 2 is a square")
    squares = {x * x % p for x in range(p)}
    return next(nu for nu in range(2, p) if nu not in squares)


@dataclass(frozen=True)
class FamilyParams:
    family: int
    p: int
    a: int
    r: int
    poly: FpPoly | None = None
    nu: int | None = None

    def __post_init__(self):
        check_prime(self.p)
        if self.family not in (1, 2, 3, 4):
            raise FamilyError(f"family must be 1, 2, 3 or 4, got {self.family}")
        if self.a < 1:
            raise FamilyError("a >= 1 required")
        if self.r < 1:
            raise FamilyError("r >= 1 required")
        if self.family == 2:
            if self.a % 2:
                raise FamilyError("family 2 requires a even (a = 2b)")
            if self.r < 3:
                raise FamilyError("family 2 requires r >= 3")
        if self.family == 3 and self.r < 3:
            raise FamilyError("family 3 requires r >= 3")
        if self.family == 4:
            if self.p == 2:
                raise FamilyError("family 4 requires p odd")
            if self.a % 2 == 0:
                raise FamilyError("family 4 requires a odd")
            if self.r < 3:
                raise FamilyError("family 4 requires r >= 3")
        poly = self.poly or find_primitive_polynomial(self.p, self.a)
        if poly.p != self.p or poly.degree != self.a or not poly.is_monic():
            raise FamilyError(f"poly must be monic of degree a={self.a} over F_{self.p}")
        object.__setattr__(self, "poly", poly)
        if self.family == 4:
            nu = quadratic_nonresidue(self.p) if self.nu is None else self.nu % self.p
            if nu == 0 or pow(nu, (self.p - 1) // 2, self.p) == 1:
                raise FamilyError(f"nu={self.nu} is not a quadratic non-residue mod {self.p}")
            object.__setattr__(self, "nu", nu)
        elif self.nu is not None:
            raise FamilyError("nu only applies to family 4")

    @property
    def n(self) -> int:
        return self.a * self.r

    @property
    def b(self) -> int | None:
        return self.a // 2 if self.family == 2 else None


@dataclass(frozen=True)
class Predicted:
    w: int
    t: int
    m_star_exp: int
    order_exp: int
    center_exp: int


def _fresh_rows(count: int, a: int, m: int, offset: int) -> list[np.ndarray]:
    rows = []
    for i in range(count):
        first = np.zeros((m, a), dtype=np.int64)
        for j in range(a):
            first[offset + i * a + j, j] = 1
        rows.append(first)
    return rows


def build_family(params: FamilyParams) -> tuple[AlternatingForm, Predicted]:
    fam, p, a, r, n = params.family, params.p, params.a, params.r, params.n
    B = companion_matrix(params.poly)
    d = 2 * n
    if fam == 1:
        pairs = [(u, v) for u in range(r) for v in range(u, r)]
    else:
        pairs = [(u, v) for u in range(r) for v in range(u + 1, r)]
    m = a * len(pairs)
    step = p ** params.b if fam == 2 else 1
    firsts = _fresh_rows(len(pairs), a, m, 0)
    s = np.zeros((m, d, d), dtype=np.int64)

    def put(i0, j0, block):
        # b(e_{i0+i}, e_{j0+j}) = block[:, i, j], antisymmetric partner included
        s[:, i0 : i0 + a, j0 : j0 + a] += block
        s[:, j0 : j0 + a, i0 : i0 + a] -= block.transpose(0, 2, 1)

    for (u, v), first in zip(pairs, firsts):
        block = orbit_block(B, first, step)
        if fam in (1, 2):
            put(u * a, n + v * a, block)
            if u != v:
                # Z_vu = Z_uv^T
                put(v * a, n + u * a, block.transpose(0, 2, 1))
        else:
            put(u * a, v * a, block)
            ycoef = -1 if fam == 3 else -params.nu
            put(n + u * a, n + v * a, ycoef * block)
    s %= p

    meta = {
        "family": fam,
        "a": a,
        "r": r,
        "poly": list(params.poly.coeffs),
        "x_block": [0, n],
        "y_block": [n, d],
    }
    if fam == 2:
        meta["b"] = params.b
    if fam == 4:
        meta["nu"] = params.nu
    form = AlternatingForm(p, d, m, s, meta)

    return form, _predict(params, m, d)


def params_from_meta(form: AlternatingForm) -> FamilyParams:
    meta = form.meta
    if "family" not in meta:
        raise FamilyError("form carries no family metadata")
    poly = FpPoly(form.p, tuple(meta["poly"])) if "poly" in meta else None
    return FamilyParams(
        int(meta["family"]), form.p, int(meta["a"]), int(meta["r"]), poly, meta.get("nu")
    )


def predicted_for(form: AlternatingForm) -> Predicted:
    return _predict(params_from_meta(form), form.m, form.d)


def _predict(params: FamilyParams, m: int, d: int) -> Predicted:
    p, a = params.p, params.a
    t = {1: p**a + 1, 2: p ** (params.b or 0) + 1, 3: 1 if p == 2 else 2, 4: 0}[params.family]
    return Predicted(w=p**a + 1, t=t, m_star_exp=2 * m + d, order_exp=m + d, center_exp=m)
