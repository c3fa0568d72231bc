"""Field structure behind a quasiantichain CD lattice.

Pick two atoms M1, M2 with V = M1 + M2 and bases x of M1, y of M2.  Every
other atom is a graph {x_j + sum_i C_ij y_i}, and together with 0 these
characteristic matrices form a finite field of matrices (the algebra V).
When at least three atoms are isotropic the cross pairing Z = b(x, y) is
symmetric, a primitive element A of V satisfies A^T Z = Z A^k with
k = p^e, and the isotropic atoms come from the subfield {C : C^T Z = Z C}
of order p^gcd(a, e).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cdcore import CdResult, PosetClass, cd_assertion, cd_exhaustive, classify, default_cap
from .errors import CapacityError, StructureError, Violation
from .ffalg import FpMatrix, companion_matrix, minimal_polynomial, subspace_count
from .formspace import AlternatingForm, Subspace, is_isotropic, perp

MAX_FIELD_ELEMENTS = 1 << 16


def _span_basis(p: int, vecs: list[np.ndarray], n: int) -> list[FpMatrix]:
    """RREF basis of the span of flattened n x n matrices."""
    if not vecs:
        return []
    r, _, rk = FpMatrix(np.array(vecs), p).rref()
    return [FpMatrix._wrap(r.array[i].reshape(n, n), p) for i in range(rk)]


def _pairing_space(p: int, n: int, p1: np.ndarray, p2: np.ndarray) -> list[FpMatrix]:
    """Basis of {C : C^T P2_s = P1_s C'' for all s, for some C''}."""
    m = p1.shape[0]
    eye = np.eye(n, dtype=np.int64)
    # coefficient of C[k,l] and of C''[k,l] in entry (s,i,j)
    lhs = np.einsum("li,skj->sijkl", eye, p2).reshape(m * n * n, n * n)
    rhs = np.einsum("sik,lj->sijkl", p1, eye).reshape(m * n * n, n * n)
    system = FpMatrix(np.concatenate([lhs, -rhs], axis=1) % p, p)
    return _span_basis(p, [v[: n * n] for v in system.kernel()], n)


def graph_algebra(
    f: AlternatingForm,
    m1: Subspace,
    m2: Subspace,
    x: np.ndarray | None = None,
    y: np.ndarray | None = None,
) -> list[FpMatrix]:
    """Basis of the matrices C whose graph over (x, y) has the same perp size as M1.

    The graph of C has perp of dimension n exactly when C^T P2 = P1 C'' is
    solvable, with P1 = b(x, perp(M2)) and P2 = b(y, perp(M1)).
    """
    n = m1.dim
    if m2.dim != n or 2 * n != f.d:
        raise StructureError("M1 and M2 must both have dimension d/2")
    x = m1.basis if x is None else np.asarray(x, dtype=np.int64)
    y = m2.basis if y is None else np.asarray(y, dtype=np.int64)
    q1, q2 = perp(f, m2), perp(f, m1)
    if q1.dim != n or q2.dim != n:
        raise StructureError("perp of an atom must have dimension d/2")
    return _pairing_space(f.p, n, f.gram(x, q1.basis), f.gram(y, q2.basis))


# ---------------------------------------------------------------------------
# characteristic matrices


@dataclass(frozen=True)
class CharacteristicData:
    m1: Subspace
    m2: Subspace
    m3: Subspace
    x: np.ndarray
    y: np.ndarray
    others: tuple[Subspace, ...]
    matrices: tuple[FpMatrix, ...]
    isotropic: tuple[bool, ...]
    z: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def frame_isotropic(self) -> tuple[bool, bool, bool]:
        """Isotropy of M1, M2, M3."""
        return self.isotropic[:3]


def _graph_matrix(p: int, n: int, t_inv: FpMatrix, atom: Subspace) -> FpMatrix:
    coords = FpMatrix(atom.basis, p) @ t_inv
    k1 = FpMatrix(coords.array[:, :n], p)
    k2 = FpMatrix(coords.array[:, n:], p)
    if not (k1.is_invertible() and k2.is_invertible()):
        raise Violation("characteristic_matrices", f"atom {atom.sort_key()} is not a graph over M1 x M2")
    return (k1.inverse() @ k2).T


def characteristic_matrices(f: AlternatingForm, atoms, isotropic=None) -> CharacteristicData:
    atoms = sorted(atoms)
    if len(atoms) < 3:
        raise StructureError("a quasiantichain needs at least three atoms")
    p, d = f.p, f.d
    n = d // 2
    if any(a.dim != n for a in atoms) or 2 * n != d:
        raise Violation("characteristic_matrices", "atoms do not all have dimension d/2")
    for i, u in enumerate(atoms):
        for v in atoms[i + 1 :]:
            if (u + v).dim != d or (u & v).dim != 0:
                raise Violation("characteristic_matrices", "atoms are not pairwise complementary")
    iso = {a: is_isotropic(f, a) for a in atoms} if isotropic is None else dict(zip(atoms, isotropic))
    abelian = [a for a in atoms if iso[a]]
    rest = [a for a in atoms if not iso[a]]
    m1 = abelian[0] if abelian else atoms[0]
    if len(abelian) >= 2:
        m2 = abelian[-1]
    else:
        m2 = next(a for a in reversed(atoms) if a != m1)
    others = [a for a in abelian + rest if a not in (m1, m2)]
    x, y = m1.basis, m2.basis

    t_inv = FpMatrix(np.vstack([x, y]), p).inverse()
    c3 = _graph_matrix(p, n, t_inv, others[0])
    # rebase y so the third atom becomes the diagonal {x_j + y_j}
    y = (c3.T @ FpMatrix(y, p)).array
    t_inv = FpMatrix(np.vstack([x, y]), p).inverse()
    mats = tuple(_graph_matrix(p, n, t_inv, a) for a in others)
    if not mats[0].is_identity():
        raise RuntimeError("rebasing failed to normalize the third atom")
    flags = (iso[m1], iso[m2]) + tuple(iso[a] for a in others)
    return CharacteristicData(m1, m2, others[0], x, y, tuple(others), mats, flags, f.gram(x, y))


# ---------------------------------------------------------------------------
# the field of characteristic matrices


@dataclass(frozen=True)
class FieldAlgebra:
    p: int
    n: int
    basis: tuple[FpMatrix, ...]
    primitive: FpMatrix | None = None
    companion_form: FpMatrix | None = None

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def size(self) -> int:
        return self.p**self.dim

    def element(self, coeffs) -> FpMatrix:
        acc = np.zeros((self.n, self.n), dtype=np.int64)
        for c, b in zip(coeffs, self.basis):
            acc += c * b.array
        return FpMatrix._wrap(acc % self.p, self.p)

    def elements(self):
        """All elements, coefficient tuples in lexicographic order."""
        if self.size > MAX_FIELD_ELEMENTS:
            raise CapacityError(f"field of {self.size} matrices is too large to enumerate", self.size)
        for coeffs in itertools.product(range(self.p), repeat=self.dim):
            yield self.element(coeffs)

    def coordinates(self, m: FpMatrix) -> tuple[int, ...] | None:
        """Coefficients of m over the basis, or None if m lies outside."""
        if not self.basis:
            return () if m.is_zero() else None
        stack = FpMatrix(np.array([b.array.ravel() for b in self.basis]), self.p)
        sol = stack.solve_left(FpMatrix(m.array.reshape(1, -1), self.p))
        return None if sol is None else tuple(int(v) for v in sol.array[0])

    def __contains__(self, m: FpMatrix) -> bool:
        return self.coordinates(m) is not None


def field_check(alg: FieldAlgebra) -> list[str]:
    """Problems preventing the algebra from being a field (empty when it is one)."""
    bad = []
    eye = FpMatrix.identity(alg.n, alg.p)
    if eye not in alg:
        bad.append("identity is not in the algebra")
    for i, u in enumerate(alg.basis):
        for v in alg.basis[i:]:
            uv = u @ v
            if uv != v @ u:
                bad.append("basis elements do not commute")
            if uv not in alg:
                bad.append("algebra is not closed under multiplication")
    for c in alg.elements():
        if not c.is_zero() and not c.is_invertible():
            bad.append(f"nonzero element {c.tolist()} is singular")
            break
    return bad


def algebra_V(char: CharacteristicData, f: AlternatingForm) -> FieldAlgebra:
    basis = graph_algebra(f, char.m1, char.m2, char.x, char.y)
    alg = FieldAlgebra(f.p, char.n, tuple(basis))
    bad = field_check(alg)
    if bad:
        raise Violation("algebra_V", "; ".join(sorted(set(bad))))
    nonzero = {c for c in alg.elements() if not c.is_zero()}
    if nonzero != set(char.matrices):
        raise Violation(
            "algebra_V",
            f"{len(nonzero)} nonzero algebra elements but {len(char.matrices)} graph atoms, "
            "or the sets differ",
        )
    return alg


def subfield_W(alg: FieldAlgebra, z: np.ndarray) -> list[FpMatrix]:
    """Basis of {C in V : C^T Z_s = Z_s C for all s}."""
    if not alg.basis:
        return []
    p = alg.p
    cols = [((c.array.T @ z - z @ c.array) % p).ravel() for c in alg.basis]
    ker = FpMatrix(np.array(cols).T, p).kernel()
    return [alg.element(v) for v in ker]


def _prime_factors(n: int) -> list[int]:
    out, q = [], 2
    while q * q <= n:
        if n % q == 0:
            out.append(q)
            while n % q == 0:
                n //= q
        q += 1
    if n > 1:
        out.append(n)
    return out


def has_order(m: FpMatrix, order: int) -> bool:
    if not (m ** order).is_identity():
        return False
    return all(not (m ** (order // q)).is_identity() for q in _prime_factors(order))


def primitive_element(alg: FieldAlgebra) -> FpMatrix:
    """First element in coefficient order whose multiplicative order is p^dim - 1."""
    target = alg.size - 1
    for c in alg.elements():
        if not c.is_zero() and has_order(c, target):
            return c
    raise Violation("primitive_element", "no element of full multiplicative order")


def frobenius_exponent(a_mat: FpMatrix, z: np.ndarray, deg: int) -> tuple[int, int]:
    """(e, k) with A^T Z_s = Z_s A^k for every slice and k = p^e (e = deg when k = 1)."""
    p = a_mat.p
    if not np.array_equal(z, z.transpose(0, 2, 1)):
        raise Violation("frobenius_exponent", "cross pairing is not symmetric")
    lhs = (a_mat.array.T @ z) % p
    order = p**deg - 1
    acc = a_mat
    k = None
    for cand in range(1, order + 1):
        if np.array_equal(lhs, (z @ acc.array) % p):
            k = cand
            break
        acc = acc @ a_mat
    if k is None:
        raise Violation("frobenius_exponent", "no k with A^T Z = Z A^k")
    if k == 1 or order == 1:
        return deg, 1
    for e in range(1, deg):
        if pow(p, e, order) == k:
            return e, k
    raise Violation("frobenius_exponent", f"k={k} is not a power of p modulo {order}")


def cyclic_decomposition(a_mat: FpMatrix, deg: int) -> tuple[FpMatrix, FpMatrix]:
    """S with S^-1 A S = Diag(B_A, ..., B_A), B_A the companion of minpoly(A)."""
    p, n = a_mat.p, a_mat.rows
    mp = minimal_polynomial(a_mat)
    if mp.degree != deg:
        raise Violation("cyclic_decomposition", f"minimal polynomial has degree {mp.degree}, expected {deg}")
    if not mp.is_irreducible():
        raise Violation("cyclic_decomposition", f"minimal polynomial {mp} is reducible")
    if n % deg:
        raise Violation("cyclic_decomposition", f"degree {deg} does not divide n={n}")
    cols: list[np.ndarray] = []
    for j in range(n):
        if len(cols) == n:
            break
        v = np.zeros(n, dtype=np.int64)
        v[j] = 1
        if cols and FpMatrix(np.array(cols + [v]), p).rank == len(cols):
            continue
        for _ in range(deg):
            cols.append(v)
            v = (a_mat.array @ v) % p
    s = FpMatrix(np.array(cols).T, p)
    block = companion_matrix(mp)
    want = FpMatrix.block_diag([block] * (n // deg))
    if s.inverse() @ a_mat @ s != want:
        raise Violation("cyclic_decomposition", "S^-1 A S is not block companion")
    return s, block


def orbit_rows_check(z: np.ndarray, block: FpMatrix, k: int) -> bool:
    """Every a x a block Z_ij satisfies row_{l+1} = row_l B^k in every slice."""
    p, a = block.p, block.rows
    bk = (block**k).array
    n = z.shape[1]
    for i0 in range(0, n, a):
        for j0 in range(0, n, a):
            blk = z[:, i0 : i0 + a, j0 : j0 + a]
            if not np.array_equal(blk[:, 1:], (blk[:, :-1] @ bk) % p):
                return False
    return True


# ---------------------------------------------------------------------------
# end to end


@dataclass
class AnalysisReport:
    w: int
    t: int
    a_obs: int | None
    e: int | None
    b_obs: int | None
    relation: str
    divides_n: bool
    n: int
    mode: str
    failed_step: str | None = None
    message: str | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "w": self.w,
            "t": self.t,
            "a_obs": self.a_obs,
            "e": self.e,
            "b_obs": self.b_obs,
            "relation": self.relation,
            "divides_n": self.divides_n,
            "n": self.n,
            "mode": self.mode,
            "details": self.details,
        }
        if self.failed_step:
            out["failed_step"] = self.failed_step
            out["message"] = self.message
        return out


def _exact_log(p: int, x: int) -> int | None:
    a, acc = 0, 1
    while acc < x:
        acc *= p
        a += 1
    return a if acc == x else None


def default_cd(f: AlternatingForm, samples: int = 0, seed: int = 0) -> CdResult:
    if subspace_count(f.p, f.d) <= default_cap():
        return cd_exhaustive(f)
    if "family" not in f.meta:
        raise CapacityError("form too large for exhaustive CD and carries no family block data")
    return cd_assertion(f, samples, seed)


def analyze(f: AlternatingForm, cd: CdResult | None = None, samples: int = 0, seed: int = 0) -> AnalysisReport:
    cd = default_cd(f, samples, seed) if cd is None else cd
    cls: PosetClass = classify(cd, f)
    if cls.shape != "quasiantichain":
        raise StructureError(f"CD lattice is a {cls.shape}, the field analysis needs a quasiantichain")
    w, t, n, p = cls.w, cls.t, f.d // 2, f.p
    rep = AnalysisReport(w, t, None, None, None, "violation", False, n, cd.mode)
    try:
        rep.a_obs = a = _exact_log(p, w - 1)
        if a is None:
            raise Violation("width", f"w - 1 = {w - 1} is not a power of {p}")
        rep.divides_n = n % a == 0
        char = characteristic_matrices(f, cls.atoms, cls.isotropic)
        alg = algebra_V(char, f)
        rep.details["dim_V"] = alg.dim
        if alg.dim != a:
            raise Violation("algebra_V", f"|V| = {p}^{alg.dim} but w - 1 = {p}^{a}")
        prim = primitive_element(alg)
        s, block = cyclic_decomposition(prim, a)
        alg = replace(alg, primitive=prim, companion_form=s)
        rep.details["blocks"] = n // a
        rep.details["minpoly"] = list(minimal_polynomial(prim).coeffs)
        if t <= 2:
            rep.relation = "t≤2"
            return rep
        if not all(char.frame_isotropic):
            raise Violation("characteristic_matrices", "t > 2 but M1, M2, M3 are not all abelian")
        e, k = frobenius_exponent(prim, char.z, a)
        rep.e = e
        rep.details["k"] = k
        wdim = len(subfield_W(alg, char.z))
        rep.details["dim_W"] = wdim
        if p**wdim + 1 != t:
            raise Violation("subfield_W", f"|W| = {p}^{wdim} but t - 1 = {t - 1}")
        rep.b_obs = b = math.gcd(a, e)
        if b != wdim:
            raise Violation("subfield_W", f"gcd(a, e) = {b} but dim W = {wdim}")
        # the relation and the block rows in the companion basis
        zs = (s.array.T @ char.z @ s.array) % p
        rep.details["orbit_rows"] = orbit_rows_check(zs, block, k)
        if not rep.details["orbit_rows"]:
            raise Violation("frobenius_exponent", "block rows of S^T Z S do not follow B^k")
        if a == b:
            rep.relation = "a=b"
        elif a == 2 * b:
            rep.relation = "a=2b"
        else:
            raise Violation("relation", f"a={a}, b={b} is neither a=b nor a=2b")
    except Violation as exc:
        rep.relation = "violation"
        rep.failed_step = exc.step
        rep.message = str(exc)
    return rep


__all__ = [
    "AnalysisReport",
    "CharacteristicData",
    "FieldAlgebra",
    "algebra_V",
    "analyze",
    "characteristic_matrices",
    "cyclic_decomposition",
    "field_check",
    "frobenius_exponent",
    "graph_algebra",
    "primitive_element",
    "subfield_W",
]
