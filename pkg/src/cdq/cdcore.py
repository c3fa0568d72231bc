"""Chermak-Delgado lattices of alternating forms.

The measure of the subgroup H >= Z(G) with image U in V is p^e with
e = 2m + dim U + dim perp(U).  The CD lattice is the set of subspaces
maximizing e.  It is computed exhaustively when V is small enough, and
otherwise from the family's block structure (assertion mode), backed by
random sampling.

The bottom member (dim 0) stands for Z(G), never the trivial subgroup.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ClassificationError, FamilyError, ValidationError
from .ffalg import FpMatrix, batch_rank, projective_points, subspace_count
from .formspace import (
    AlternatingForm,
    Subspace,
    batch_measure_exponents,
    is_isotropic,
    measure_exponent,
    pattern_batches,
    perp,
    pivot_patterns,
    require_zero_radical,
    validate_form,
)

DEFAULT_CAP = 5_000_000


def default_cap() -> int:
    env = os.environ.get("CDQ_MAX_SUBSPACES")
    return int(env) if env else DEFAULT_CAP


@dataclass(frozen=True)
class CdResult:
    m_star_exp: int
    members: tuple[Subspace, ...]
    mode: str
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("exhaustive", "assertion", "sampled"):
            raise ValidationError(f"unknown CD mode {self.mode!r}")
        if self.mode != "sampled" and not self.members:
            raise ValidationError("a CD result needs at least one member")


@dataclass(frozen=True)
class PosetClass:
    shape: str
    w: int | None
    t: int | None
    bottom: Subspace | None
    top: Subspace | None
    atoms: tuple[Subspace, ...]
    isotropic: tuple[bool, ...] = ()


def _checked(f: AlternatingForm):
    rep = validate_form(f)
    if not rep.alternating:
        raise ValidationError("form slices are not alternating")
    require_zero_radical(f)


def _scan_pattern(f: AlternatingForm, k: int, pivots, free):
    best, found, count = -1, [], 0
    chunk = max(1024, (1 << 21) // max(1, f.m * k * f.d))
    for batch in pattern_batches(f.p, f.d, pivots, free, chunk):
        exps = batch_measure_exponents(f, batch, np.full(len(batch), k))
        count += len(batch)
        top = int(exps.max())
        if top < best:
            continue
        if top > best:
            best, found = top, []
        found.extend(
            Subspace._from_rref(f.p, f.d, batch[i], pivots) for i in np.nonzero(exps == top)[0]
        )
    return best, found, count


def cd_exhaustive(f: AlternatingForm, cap: int | None = None, workers: int = 1) -> CdResult:
    """All maximizers, by scanning every subspace of V."""
    _checked(f)
    cap = default_cap() if cap is None else cap
    total = subspace_count(f.p, f.d)
    if total > cap:
        raise CapacityError(
            f"exhaustive CD needs {total} subspaces of F_{f.p}^{f.d} (cap {cap}); "
            "use assertion mode",
            total,
        )
    tasks = [(k, piv, free) for k in range(f.d + 1) for piv, free in pivot_patterns(f.d, k)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda t: _scan_pattern(f, *t), tasks))
    else:
        parts = [_scan_pattern(f, *t) for t in tasks]
    # merge in task order so the output does not depend on scheduling
    best = max(part[0] for part in parts)
    members = [s for part in parts if part[0] == best for s in part[1]]
    by_dim = [0] * (f.d + 1)
    for (k, _, _), part in zip(tasks, parts):
        by_dim[k] += part[2]
    scanned = sum(by_dim)
    if scanned != total:
        raise RuntimeError(f"scanned {scanned} subspaces, expected {total}")
    return CdResult(best, tuple(members), "exhaustive", {"scanned": scanned, "by_dim": by_dim})


def classify(res: CdResult, f: AlternatingForm) -> PosetClass:
    if res.mode == "sampled":
        raise ClassificationError("sampled results only bound m*; they cannot be classified")
    members = sorted(res.members)
    n = len(members)
    le = [[members[i] <= members[j] for j in range(n)] for i in range(n)]
    bottoms = [i for i in range(n) if all(le[i])]
    tops = [j for j in range(n) if all(le[i][j] for i in range(n))]
    bottom = members[bottoms[0]] if bottoms else None
    top = members[tops[0]] if tops else None
    middle = [i for i in range(n) if i not in bottoms and i not in tops]
    # atoms: members right above the bottom
    atoms = [
        i
        for i in middle
        if not any(le[j][i] and j != i for j in middle)
    ]
    atom_spaces = tuple(members[i] for i in atoms)
    iso = tuple(is_isotropic(f, s) for s in atom_spaces)
    chain = all(le[i][j] or le[j][i] for i in range(n) for j in range(n))
    if chain:
        return PosetClass("chain", None, None, bottom, top, atom_spaces, iso)
    antichain = all(not le[i][j] for i in middle for j in middle if i != j)
    if bottom is not None and top is not None and antichain and len(middle) >= 3:
        return PosetClass("quasiantichain", len(middle), sum(iso), bottom, top, atom_spaces, iso)
    return PosetClass("other", None, None, bottom, top, atom_spaces, iso)


@dataclass
class AxiomReport:
    violations: list[str]
    pairs_checked: int
    members_checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_cd_axioms(res: CdResult, f: AlternatingForm) -> AxiomReport:
    """Closure under sum, intersection and perp; perp an involution."""
    if res.mode == "sampled":
        raise ClassificationError("axioms need a complete member list")
    members = list(res.members)
    index = set(members)
    bad: list[str] = []
    pairs = 0
    for i, u in enumerate(members):
        for v in members[i + 1 :]:
            pairs += 1
            if u + v not in index:
                bad.append(f"sum of members {u.sort_key()} and {v.sort_key()} is not a member")
            if (u & v) not in index:
                bad.append(f"intersection of {u.sort_key()} and {v.sort_key()} is not a member")
    for u in members:
        pu = perp(f, u)
        if pu not in index:
            bad.append(f"perp of {u.sort_key()} is not a member")
        if perp(f, pu) != u:
            bad.append(f"perp(perp(U)) != U for {u.sort_key()}")
        if measure_exponent(f, u) != res.m_star_exp:
            bad.append(f"member {u.sort_key()} does not attain m*")
    return AxiomReport(bad, pairs, len(members))


# ---------------------------------------------------------------------------
# assertion mode


def block_indices(f: AlternatingForm) -> tuple[range, range]:
    meta = f.meta
    if "x_block" not in meta or "y_block" not in meta:
        raise FamilyError("form lacks x_block/y_block metadata")
    return range(*meta["x_block"]), range(*meta["y_block"])


def _commutation_ranks(f: AlternatingForm, src: range, target: Sequence[int]) -> np.ndarray:
    """Rank of v -> b(x, v) on span(e_j : j in target) for every projective x in span(src)."""
    pts = projective_points(f.p, len(src))
    xs = np.zeros((len(pts), f.d), dtype=np.int64)
    xs[:, list(src)] = pts
    # maps[n, s, j] = b(x_n, e_target_j)_s
    maps = np.einsum("nd,sde->nse", xs, f.slices[:, :, list(target)]) % f.p
    return batch_rank(maps, f.p)


@dataclass
class AssertionReport:
    family: int
    checks: dict

    @property
    def ok(self) -> bool:
        return all(c["pass"] for c in self.checks.values())


def assertion_check(f: AlternatingForm) -> AssertionReport:
    """Per-element commutation ranks on the X and Y blocks against the family bound."""
    if "family" not in f.meta:
        raise FamilyError("assertion_check needs a form built by the families module")
    fam, a, r = int(f.meta["family"]), int(f.meta["a"]), int(f.meta["r"])
    xb, yb = block_indices(f)
    n = len(xb)
    whole = range(f.d)
    if fam == 1:
        plan = {"x_vs_G": (xb, whole, "==", n), "y_vs_G": (yb, whole, "==", n)}
    elif fam == 2:
        plan = {"x_vs_Y": (xb, yb, ">=", (r - 1) * a), "y_vs_X": (yb, xb, ">=", (r - 1) * a)}
    else:
        plan = {"x_vs_X": (xb, xb, ">=", (r - 1) * a), "y_vs_Y": (yb, yb, ">=", (r - 1) * a)}
    checks = {}
    for name, (src, tgt, op, bound) in plan.items():
        ranks = _commutation_ranks(f, src, tgt)
        lo, hi = int(ranks.min()), int(ranks.max())
        ok = (lo == hi == bound) if op == "==" else lo >= bound
        checks[name] = {"count": len(ranks), "min": lo, "max": hi, "bound": f"{op} {bound}", "pass": ok}
    X = Subspace.coordinate(f.p, f.d, xb)
    Y = Subspace.coordinate(f.p, f.d, yb)
    want = (X, Y) if fam in (1, 2) else (Y, X)
    checks["centralizers"] = {
        "perp_X": "X" if perp(f, X) == X else ("Y" if perp(f, X) == Y else "other"),
        "perp_Y": "Y" if perp(f, Y) == Y else ("X" if perp(f, Y) == X else "other"),
        "pass": perp(f, X) == want[0] and perp(f, Y) == want[1],
    }
    return AssertionReport(fam, checks)


@dataclass
class AtomSearch:
    m_star_exp: int
    atoms: tuple[Subspace, ...]
    graphs: tuple[tuple[FpMatrix, Subspace], ...]
    candidates: list[FpMatrix]

    @property
    def ok(self) -> bool:
        return not self.candidates


def graph_subspace(f: AlternatingForm, c: FpMatrix) -> Subspace:
    """{x_j + sum_i c_ij y_j} over the x/y blocks."""
    xb, yb = block_indices(f)
    rows = np.zeros((len(xb), f.d), dtype=np.int64)
    rows[:, list(xb)] = np.eye(len(xb), dtype=np.int64)
    rows[:, list(yb)] = c.array.T
    return Subspace(f.p, f.d, rows)


def atom_graph_search(f: AlternatingForm, algebra: Sequence[FpMatrix]) -> AtomSearch:
    """Graphs of the nonzero elements of the pairing algebra, plus X and Y.

    algebra is a basis of the linear space of characteristic matrices
    relative to the X/Y split.
    """
    require_zero_radical(f)
    xb, yb = block_indices(f)
    X = Subspace.coordinate(f.p, f.d, xb)
    Y = Subspace.coordinate(f.p, f.d, yb)
    m_star = measure_exponent(f, Subspace.zero(f.p, f.d))
    candidates = []
    for name, s in (("X", X), ("Y", Y)):
        if measure_exponent(f, s) != m_star:
            raise ValidationError(f"{name} block does not attain the bottom measure")
    graphs = []
    for c in _span_elements(algebra, f.p):
        if c.is_zero():
            continue
        g = graph_subspace(f, c)
        if measure_exponent(f, g) == m_star:
            graphs.append((c, g))
        else:
            candidates.append(c)
    atoms = tuple(sorted([X, Y] + [g for _, g in graphs]))
    return AtomSearch(m_star, atoms, tuple(graphs), candidates)


def _span_elements(basis: Sequence[FpMatrix], p: int):
    if not basis:
        return
    stack = np.array([b.array for b in basis])
    for coeffs in itertools.product(range(p), repeat=len(basis)):
        yield FpMatrix._wrap(np.tensordot(np.array(coeffs), stack, 1) % p, p)


def cd_assertion(f: AlternatingForm, samples: int = 0, seed: int = 0) -> CdResult:
    """CD lattice from the family's proof structure, optionally sampled for m*."""
    from .structure import graph_algebra

    _checked(f)
    xb, yb = block_indices(f)
    X = Subspace.coordinate(f.p, f.d, xb)
    Y = Subspace.coordinate(f.p, f.d, yb)
    search = atom_graph_search(f, graph_algebra(f, X, Y))
    report = assertion_check(f)
    evidence = {
        "assertion": report.checks,
        "assertion_ok": report.ok,
        "graph_atoms": len(search.graphs),
        "falsification_candidates": [c.tolist() for c in search.candidates],
    }
    if samples:
        sr = sample_check(f, search.m_star_exp, samples, seed)
        evidence["sample"] = sr.summary()
    members = (Subspace.zero(f.p, f.d),) + search.atoms + (Subspace.whole(f.p, f.d),)
    return CdResult(search.m_star_exp, members, "assertion", evidence)


# ---------------------------------------------------------------------------
# sampling


@dataclass
class SampleReport:
    claimed: int
    samples: int
    seed: int
    max_seen: int | None
    violation_count: int
    violations: list[Subspace]

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    @property
    def no_evidence(self) -> bool:
        return self.samples == 0

    def summary(self) -> dict:
        return {
            "claimed": self.claimed,
            "samples": self.samples,
            "seed": self.seed,
            "max_seen": self.max_seen,
            "violation_count": self.violation_count,
            "violations": [v.to_json() for v in self.violations],
            "no_evidence": self.no_evidence,
        }


def sample_check(
    f: AlternatingForm,
    claimed: int,
    n: int,
    seed: int = 0,
    chunk: int = 1 << 15,
    keep: int = 100,
) -> SampleReport:
    """Random subspaces (dimension uniform in [0, d]) versus a claimed m*.

    Not uniform over subspaces; only evidence that nothing beats the claim.
    The first `keep` violating subspaces are returned, all are counted.
    """
    require_zero_radical(f)
    rng = np.random.default_rng(seed)
    d, p = f.d, f.p
    done = 0
    max_seen = None
    count = 0
    kept: list[Subspace] = []
    while done < n:
        c = min(chunk, n - done)
        dims = rng.integers(0, d + 1, size=c)
        mats = rng.integers(0, p, size=(c, d, d), dtype=np.int64)
        mats[np.arange(d)[None, :] >= dims[:, None]] = 0
        exps = batch_measure_exponents(f, mats)
        top = int(exps.max())
        max_seen = top if max_seen is None else max(max_seen, top)
        bad = np.nonzero(exps > claimed)[0]
        count += len(bad)
        for i in bad[: max(0, keep - len(kept))]:
            kept.append(Subspace(p, d, mats[i]))
        done += c
    return SampleReport(claimed, n, seed, max_seen, count, kept)


# ---------------------------------------------------------------------------
# serialization


def result_to_json(res: CdResult, f: AlternatingForm, cls: PosetClass | None = None, seed=None) -> dict:
    out = {
        "p": f.p,
        "d": f.d,
        "m_star_exp": res.m_star_exp,
        "mode": res.mode,
        "members": [
            dict(s.to_json(), isotropic=is_isotropic(f, s)) for s in sorted(res.members)
        ],
    }
    if cls is not None:
        out["shape"] = cls.shape
        if cls.w is not None:
            out["w"] = cls.w
        if cls.t is not None:
            out["t"] = cls.t
    if seed is not None:
        out["seed"] = seed
    out["evidence"] = res.evidence
    return out


def result_from_json(obj: dict) -> CdResult:
    p, d = int(obj["p"]), int(obj["d"])
    members = tuple(Subspace.from_json(p, d, m) for m in obj["members"])
    return CdResult(int(obj["m_star_exp"]), members, obj["mode"], obj.get("evidence", {}))
