"""The group itself, as a central extension of V by W.

Elements are pairs (v, w) with product

    (v, w)(v', w') = (v + v', w + w' + beta(v, v'))

where beta_s is the strict upper triangle of slice s.  Since the slices
are alternating, beta(u, v) - beta(v, u) = b(u, v), so commutators land
in W and equal the form.  This gives an element-level check on the
subspace-level measure computation, on groups small enough to list.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError, ValidationError
from .formspace import AlternatingForm, Subspace, measure_exponent

MAX_GROUP_ORDER = 1 << 20


@dataclass(frozen=True)
class GroupElement:
    v: tuple[int, ...]
    w: tuple[int, ...]

    def array(self) -> np.ndarray:
        return np.array(self.v + self.w, dtype=np.int64)


class CentralExtension:
    def __init__(self, f: AlternatingForm):
        self.f = f
        self.p, self.d, self.m = f.p, f.d, f.m
        self.beta = np.triu(f.slices, k=1) % f.p
        self._beta_flat = self.beta.transpose(1, 0, 2).reshape(self.d, self.m * self.d)
        self.width = self.d + self.m
        self.order = self.p**self.width

    # elements as rows [v | w]
    def element(self, v, w=None) -> GroupElement:
        v = tuple(int(x) % self.p for x in v)
        w = tuple(int(x) % self.p for x in (w if w is not None else [0] * self.m))
        if len(v) != self.d or len(w) != self.m:
            raise ValidationError(f"element needs {self.d} + {self.m} coordinates")
        return GroupElement(v, w)

    def _from_row(self, row) -> GroupElement:
        return GroupElement(tuple(int(x) for x in row[: self.d]), tuple(int(x) for x in row[self.d :]))

    def _rows(self, g) -> np.ndarray:
        if isinstance(g, GroupElement):
            if len(g.v) != self.d or len(g.w) != self.m:
                raise ValidationError("element belongs to a different group")
            return g.array()[None, :]
        g = np.asarray(g, dtype=np.int64)
        if g.shape[-1] != self.width:
            raise ValidationError(f"rows must have {self.width} coordinates")
        return g.reshape(-1, self.width)

    def identity(self) -> GroupElement:
        return GroupElement((0,) * self.d, (0,) * self.m)

    def generators(self) -> list[GroupElement]:
        """x/y basis generators e_i with trivial central part."""
        eye = np.eye(self.d, dtype=np.int64)
        return [self.element(row) for row in eye]

    def center_generators(self) -> list[GroupElement]:
        eye = np.eye(self.m, dtype=np.int64)
        return [self.element([0] * self.d, row) for row in eye]

    # vectorized arithmetic on (N, d + m) arrays
    def _beta(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        left = (a @ self._beta_flat).reshape(len(a), self.m, self.d)
        return (left * b[:, None, :]).sum(axis=2)

    def mul_rows(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        d, p = self.d, self.p
        out = g + h
        out[:, d:] += self._beta(g[:, :d], h[:, :d])
        return out % p

    def inv_rows(self, g: np.ndarray) -> np.ndarray:
        d = self.d
        out = -g
        out[:, d:] += self._beta(g[:, :d], g[:, :d])
        return out % self.p

    def comm_rows(self, g: np.ndarray, h: np.ndarray) -> np.ndarray:
        """g^-1 h^-1 g h by honest multiplication."""
        return self.mul_rows(self.mul_rows(self.inv_rows(g), self.inv_rows(h)), self.mul_rows(g, h))

    def pow_rows(self, g: np.ndarray, k: int) -> np.ndarray:
        if k < 0:
            return self.pow_rows(self.inv_rows(g), -k)
        result = np.zeros_like(g)
        base = g.copy()
        while k:
            if k & 1:
                result = self.mul_rows(result, base)
            base = self.mul_rows(base, base)
            k >>= 1
        return result

    # single elements
    def multiply(self, g: GroupElement, h: GroupElement) -> GroupElement:
        return self._from_row(self.mul_rows(self._rows(g), self._rows(h))[0])

    def inverse(self, g: GroupElement) -> GroupElement:
        return self._from_row(self.inv_rows(self._rows(g))[0])

    def power(self, g: GroupElement, k: int) -> GroupElement:
        return self._from_row(self.pow_rows(self._rows(g), k)[0])

    def commutator(self, g: GroupElement, h: GroupElement) -> GroupElement:
        return self._from_row(self.comm_rows(self._rows(g), self._rows(h))[0])

    # integer codes, base p with the first coordinate most significant
    @cached_property
    def _weights(self) -> np.ndarray:
        return self.p ** np.arange(self.width - 1, -1, -1, dtype=np.int64)

    def encode(self, rows: np.ndarray) -> np.ndarray:
        return rows @ self._weights

    def decode(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        return (codes[:, None] // self._weights[None, :]) % self.p

    def require_capacity(self):
        if self.order > MAX_GROUP_ORDER:
            raise CapacityError(
                f"|G| = {self.p}^{self.width} exceeds the element oracle's limit of {MAX_GROUP_ORDER}",
                self.order,
            )

    @cached_property
    def all_rows(self) -> np.ndarray:
        self.require_capacity()
        return self.decode(np.arange(self.order, dtype=np.int64))

    def random_rows(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.integers(0, self.p, size=(n, self.width), dtype=np.int64)


def group_op(f: AlternatingForm, g: GroupElement, h: GroupElement | None = None, kind: str = "multiply", k: int = 0):
    grp = CentralExtension(f)
    if kind == "multiply":
        return grp.multiply(g, h)
    if kind == "inverse":
        return grp.inverse(g)
    if kind == "power":
        return grp.power(g, k)
    if kind == "commutator":
        return grp.commutator(g, h)
    raise ValidationError(f"unknown group operation {kind!r}")


@dataclass(frozen=True)
class ElementSubgroup:
    generators: tuple[GroupElement, ...]
    codes: np.ndarray

    @property
    def order(self) -> int:
        return len(self.codes)

    def __contains__(self, code: int) -> bool:
        i = np.searchsorted(self.codes, code)
        return bool(i < len(self.codes) and self.codes[i] == code)


def _gen_rows(grp: CentralExtension, gens) -> np.ndarray:
    if len(gens) == 0:
        return np.zeros((0, grp.width), dtype=np.int64)
    if isinstance(gens, np.ndarray):
        return gens.reshape(-1, grp.width) % grp.p
    return np.vstack([grp._rows(g) for g in gens])


def subgroup_closure(grp: CentralExtension, gens) -> ElementSubgroup:
    """Breadth-first closure of the generators under right multiplication."""
    grp.require_capacity()
    g_rows = _gen_rows(grp, gens)
    seen = np.zeros(grp.order, dtype=bool)
    seen[0] = True
    frontier = np.zeros((1, grp.width), dtype=np.int64)
    while len(frontier) and len(g_rows):
        nxt = []
        for g in g_rows:
            prod = grp.mul_rows(frontier, np.broadcast_to(g, frontier.shape).copy())
            codes = grp.encode(prod)
            fresh = ~seen[codes]
            codes_new, idx = np.unique(codes[fresh], return_index=True)
            seen[codes_new] = True
            nxt.append(prod[fresh][idx])
        frontier = np.vstack(nxt)
    codes = np.nonzero(seen)[0]
    if grp.order % len(codes):
        raise RuntimeError(f"closure of order {len(codes)} does not divide |G| = {grp.order}")
    gens_t = tuple(grp._from_row(r) for r in g_rows)
    return ElementSubgroup(gens_t, codes)


def centralizer_elements(
    grp: CentralExtension, h: ElementSubgroup, seed: int = 0, checks: int = 32
) -> ElementSubgroup:
    """{g : [g, h] = 1 for every generator h}, by scanning all of G."""
    rows = grp.all_rows
    keep = np.ones(len(rows), dtype=bool)
    for gen in h.generators:
        hg = np.broadcast_to(grp._rows(gen), rows.shape).copy()
        keep &= ~grp.comm_rows(rows, hg).any(axis=1)
    codes = np.nonzero(keep)[0]
    # generators suffice: spot-check random members of H against random centralizer elements
    rng = np.random.default_rng(seed)
    if len(h.codes) and len(codes):
        hs = grp.decode(rng.choice(h.codes, size=checks))
        cs = grp.decode(rng.choice(codes, size=checks))
        if grp.comm_rows(hs, cs).any():
            raise RuntimeError("centralizer of the generators fails on other elements of H")
    return ElementSubgroup((), codes)


def _log_p(p: int, x: int) -> int:
    e = 0
    while x > 1:
        if x % p:
            raise RuntimeError(f"{x} is not a power of {p}")
        x //= p
        e += 1
    return e


def element_measure_exponent(grp: CentralExtension, h: ElementSubgroup, seed: int = 0) -> int:
    c = centralizer_elements(grp, h, seed)
    return _log_p(grp.p, h.order * c.order)


def preimage(grp: CentralExtension, u: Subspace) -> ElementSubgroup:
    gens = [grp.element(row) for row in u.basis] + grp.center_generators()
    return subgroup_closure(grp, gens)


@dataclass
class CrossCheck:
    subspace: Subspace
    element_exp: int
    subspace_exp: int

    @property
    def ok(self) -> bool:
        return self.element_exp == self.subspace_exp


def cross_check_measure(f: AlternatingForm, u: Subspace, seed: int = 0, grp: CentralExtension | None = None) -> CrossCheck:
    grp = grp or CentralExtension(f)
    h = preimage(grp, u)
    if h.order != grp.p ** (u.dim + grp.m):
        raise RuntimeError(f"preimage of a {u.dim}-dimensional subspace has order {h.order}")
    return CrossCheck(u, element_measure_exponent(grp, h, seed), measure_exponent(f, u))


@dataclass
class RandomSubgroupReport:
    m_star_exp: int
    seed: int
    tried: int
    max_seen: int
    exceeding: list[list[list[int]]]

    @property
    def ok(self) -> bool:
        return not self.exceeding

    def summary(self) -> dict:
        return {
            "m_star_exp": self.m_star_exp,
            "seed": self.seed,
            "subgroups": self.tried,
            "max_seen": self.max_seen,
            "exceeding": self.exceeding,
        }


def random_subgroup_check(
    f: AlternatingForm, m_star_exp: int, n: int, seed: int = 0, max_gens: int = 3,
    grp: CentralExtension | None = None,
) -> RandomSubgroupReport:
    """Random subgroups not containing Z(G): none may have measure above p^m*."""
    grp = grp or CentralExtension(f)
    rng = np.random.default_rng(seed)
    center = np.arange(grp.p**grp.m, dtype=np.int64)  # codes (0, w) are the low ones
    tried, max_seen, bad = 0, -1, []
    while tried < n:
        k = int(rng.integers(1, max_gens + 1))
        gens = grp.random_rows(rng, k)
        h = subgroup_closure(grp, gens)
        if np.isin(center, h.codes).all():
            continue
        exp = element_measure_exponent(grp, h, int(rng.integers(1 << 31)))
        max_seen = max(max_seen, exp)
        if exp > m_star_exp:
            bad.append(gens.tolist())
        tried += 1
    return RandomSubgroupReport(m_star_exp, seed, tried, max_seen, bad)
