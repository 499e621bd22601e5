"""Generic vector-lattice and f-algebra machinery.

Everything in this module is written against a small carrier protocol
(:class:`LatticeElement`), so the law suites and the idempotent/partition
calculus work for any carrier that provides pointwise order and ring
operations.  The only carrier shipped with the package is the finite one
(:class:`rieszmod.spaces.Fn`); the theorems are verified where they are
decidable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Protocol, Sequence, runtime_checkable

from .errors import NonIdempotentInput, NotAPartition, PartitionMismatch

#: Absolute tolerance for ring-mixed identities (products introduce rounding;
#: pure lattice operations on shared inputs are exact in IEEE doubles).
RING_TOL = 1e-12


@runtime_checkable
class LatticeElement(Protocol):
    """Carrier protocol: a Riesz space with a compatible ring multiplication.

    Required operations: ``+``, ``-``, unary ``-``, ring product ``*``,
    ``scale`` (multiplication by a real scalar), lattice ``join`` /``meet``,
    the partial order ``leq``, exact equality ``equals``, a ``deviation``
    pseudo-metric used only for tolerance checks and reports, the constants
    ``zero()`` / ``one()``, and ``chi_pos()``, the idempotent indicator of
    the strictly positive part (the lattice-theoretic sup of ``(n u^+) ^ 1``
    over n, which any Dedekind sigma-complete carrier possesses and which a
    finite carrier computes directly).
    """

    def __add__(self, other: Any) -> Any: ...

    def __sub__(self, other: Any) -> Any: ...

    def __neg__(self) -> Any: ...

    def __mul__(self, other: Any) -> Any: ...

    def scale(self, lam: float) -> Any: ...

    def join(self, other: Any) -> Any: ...

    def meet(self, other: Any) -> Any: ...

    def leq(self, other: Any) -> bool: ...

    def equals(self, other: Any) -> bool: ...

    def deviation(self, other: Any) -> float: ...

    def zero(self) -> Any: ...

    def one(self) -> Any: ...

    def chi_pos(self) -> Any: ...


def positive_part(u):
    """u v 0."""
    return u.join(u.zero())


def negative_part(u):
    """(-u) v 0."""
    return (-u).join(u.zero())


def abs_value(u):
    """(-u) v u."""
    return (-u).join(u)


def riesz_decompose(u):
    """Split u into (positive part, negative part, absolute value).

    Returns ``(u v 0, (-u) v 0, u^+ + u^-)``; the two parts are disjoint and
    reassemble u as ``u = u^+ - u^-``.
    """
    pos = positive_part(u)
    neg = negative_part(u)
    return pos, neg, pos + neg


@dataclass(frozen=True)
class Idempotent:
    """An element with u*u = u, acting as a characteristic function.

    Such elements automatically satisfy 0 <= u <= 1.
    """

    element: Any

    def __post_init__(self):
        u = self.element
        if (u * u).deviation(u) > RING_TOL:
            raise NonIdempotentInput("element is not idempotent: u*u != u")

    def complement(self) -> "Idempotent":
        return Idempotent(self.element.one() - self.element)

    def __mul__(self, other: "Idempotent") -> "Idempotent":
        return Idempotent(self.element * other.element)

    def boxplus(self, other: "Idempotent") -> "Idempotent":
        """Boolean symmetric difference u + v - 2uv."""
        u, v = self.element, other.element
        return Idempotent(u + v - (u * v).scale(2.0))

    def boxtimes(self, other: "Idempotent") -> "Idempotent":
        """Boolean intersection uv."""
        return self * other

    def is_zero(self) -> bool:
        return self.element.equals(self.element.zero())


@dataclass(frozen=True)
class FinitePartition:
    """Pairwise disjoint idempotents summing to a given idempotent."""

    parts: tuple[Idempotent, ...]
    of: Idempotent

    def __post_init__(self):
        elems = [p.element for p in self.parts]
        for i in range(len(elems)):
            for j in range(i + 1, len(elems)):
                if (elems[i] * elems[j]).deviation(elems[i].zero()) > RING_TOL:
                    raise NotAPartition("partition parts are not pairwise disjoint")
        total = self.of.element.zero()
        for e in elems:
            total = total + e
        if total.deviation(self.of.element) > RING_TOL:
            raise NotAPartition("partition parts do not sum to the covered idempotent")

    def __len__(self) -> int:
        return len(self.parts)


@dataclass(frozen=True)
class SimpleElement:
    """A finite real combination sum_i lambda_i u_i over a partition of the unit."""

    coefficients: tuple[float, ...]
    partition: FinitePartition

    def __post_init__(self):
        if len(self.coefficients) != len(self.partition.parts):
            raise NotAPartition("one coefficient per partition part is required")

    def value(self):
        out = self.partition.of.element.zero()
        for lam, part in zip(self.coefficients, self.partition.parts):
            out = out + part.element.scale(lam)
        return out


def disjointify(us: Sequence[Idempotent]) -> list[Idempotent]:
    """Make a sequence of idempotents pairwise disjoint, preserving prefix sups.

    Uses the recurrence u'_n = u_n - sum_{k<n} u_n u'_k.  The output has the
    same length as the input (parts that become zero are kept in place), is
    pairwise disjoint, and for every n the sup of the first n outputs equals
    the sup of the first n inputs.
    """
    out: list[Idempotent] = []
    for u in us:
        if not isinstance(u, Idempotent):
            raise NonIdempotentInput("disjointify expects Idempotent inputs")
        acc = u.element
        for prev in out:
            acc = acc - u.element * prev.element
        out.append(Idempotent(acc))
    return out


def refine_partitions(p: FinitePartition, q: FinitePartition) -> FinitePartition:
    """Common refinement (u_i v_j)_{i,j} of two partitions of the same idempotent.

    Zero cross-products are dropped; the remaining parts are ordered
    lexicographically in the source indices (i, j), which fixes a canonical
    form for golden tests.
    """
    if not p.of.element.equals(q.of.element):
        raise PartitionMismatch("partitions cover different idempotents")
    parts = []
    for ui in p.parts:
        for vj in q.parts:
            prod = ui * vj
            if not prod.is_zero():
                parts.append(prod)
    return FinitePartition(tuple(parts), p.of)


_SIMPLE_OPS = {
    "+": lambda a, b: a + b,
    "*": lambda a, b: a * b,
    "max": max,
    "min": min,
}


def simple_combine(u: SimpleElement, v: SimpleElement, op: str) -> SimpleElement:
    """Combine two simple elements coefficientwise over the refined partition.

    ``op`` is one of ``"+"``, ``"*"``, ``"max"``, ``"min"``; the result has
    coefficients lambda_i op mu_j on the parts u_i v_j and agrees pointwise
    with ``op`` applied to the values.
    """
    if op not in _SIMPLE_OPS:
        raise ValueError(f"op must be one of {sorted(_SIMPLE_OPS)}, got {op!r}")
    f = _SIMPLE_OPS[op]
    coeffs = []
    parts = []
    for lam, ui in zip(u.coefficients, u.partition.parts):
        for mu, vj in zip(v.coefficients, v.partition.parts):
            prod = ui * vj
            if not prod.is_zero():
                coeffs.append(float(f(lam, mu)))
                parts.append(prod)
    partition = FinitePartition(tuple(parts), u.partition.of)
    return SimpleElement(tuple(coeffs), partition)


def check_disjoint(s: Sequence[Any]) -> bool:
    """True iff |u| ^ |v| = 0 for all distinct members of the family."""
    zero = None
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if zero is None:
                zero = s[i].zero()
            if not abs_value(s[i]).meet(abs_value(s[j])).equals(zero):
                return False
    return True


def check_disjoint_products(s: Sequence[Any]) -> bool:
    """True iff all pairwise products vanish.

    On Archimedean carriers (every finite carrier is, being Dedekind
    sigma-complete) this is equivalent to :func:`check_disjoint`; the two
    routes are kept separate so tests can compare them independently.
    """
    zero = None
    for i in range(len(s)):
        for j in range(i + 1, len(s)):
            if zero is None:
                zero = s[i].zero()
            if not (s[i] * s[j]).equals(zero):
                return False
    return True


# --------------------------------------------------------------------------
# Law suite
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LawResult:
    id: str
    passed: bool
    counterexample: dict | None

    def to_json(self) -> dict:
        return {"id": self.id, "passed": self.passed, "counterexample": self.counterexample}


@dataclass(frozen=True)
class LawReport:
    laws: tuple[LawResult, ...]

    def all_passed(self) -> bool:
        return all(r.passed for r in self.laws)

    def failed_ids(self) -> list[str]:
        return [r.id for r in self.laws if not r.passed]

    def to_json(self) -> dict:
        return {"laws": [r.to_json() for r in self.laws]}


def _pairs_riesz_1(u, v, w):
    out = []
    for lam in (0.5, 3.0):
        out.append(((u.join(v)).scale(lam), u.scale(lam).join(v.scale(lam)), "eq"))
    return out


def _pairs_riesz_1b(u, v, w):
    return [
        (abs_value(u.scale(lam)), abs_value(u).scale(lam), "eq")
        for lam in (0.0, 0.5, 3.0)
    ]


def _pairs_riesz_2(u, v, w):
    return [(-(u.join(v)), (-u).meet(-v), "eq")]


def _pairs_riesz_3(u, v, w):
    return [(u + v.join(w), (u + v).join(u + w), "eq")]


def _pairs_riesz_4(u, v, w):
    return [(u + v.meet(w), (u + v).meet(u + w), "eq")]


def _pairs_riesz_4b(u, v, w):
    return [(u.join(v) + u.meet(v), u + v, "eq")]


def _pairs_riesz_5(u, v, w):
    return [(u, positive_part(u) - negative_part(u), "eq")]


def _pairs_riesz_6(u, v, w):
    p, n = positive_part(u), negative_part(u)
    return [(abs_value(u), p.join(n), "eq"), (p.join(n), p + n, "eq")]


def _pairs_riesz_6b(u, v, w):
    return [(positive_part(u).meet(negative_part(u)), u.zero(), "eq")]


def _pairs_riesz_6c(u, v, w):
    return [(positive_part(u + v), positive_part(u) + positive_part(v), "leq")]


def _pairs_riesz_6d(u, v, w):
    return [(abs_value(u + v), abs_value(u) + abs_value(v), "leq")]


def _pairs_riesz_6e(u, v, w):
    a, b, c = abs_value(u), abs_value(v), abs_value(w)
    return [(a.meet(b + c), a.meet(b) + a.meet(c), "leq")]


def _pairs_falg_7(u, v, w):
    return [(positive_part(u) * negative_part(u), u.zero(), "eq")]


def _pairs_falg_8(u, v, w):
    a = abs_value(u)
    return [(positive_part(a * v), a * positive_part(v), "eq")]


def _disjoint_pair(u, v, w):
    # Split u and v onto complementary supports derived from w so that the
    # resulting pair has pointwise-disjoint carriers.
    m = w.chi_pos()
    mc = m.one() - m
    return u * m, v * mc


def _pairs_falg_8b(u, v, w):
    a, b = _disjoint_pair(positive_part(u), positive_part(v), w)
    return [(abs_value(a - b), abs_value(a + b), "eq")]


def _pairs_falg_8c(u, v, w):
    a, b = _disjoint_pair(u, v, w)
    return [(abs_value(a + b), abs_value(a) + abs_value(b), "eq")]


def _pairs_falg_prod(u, v, w):
    return [(abs_value(u * v), abs_value(u) * abs_value(v), "eq")]


def _pairs_falg_9(u, v, w):
    a = abs_value(u)
    return [(a * v.meet(w), a * v.join(w), "leq")]


#: Law table: (stable id, tolerance class, evaluator).  Each evaluator takes a
#: sample triple (u, v, w), derives any hypothesis-satisfying inputs it needs
#: deterministically from the triple, and returns (lhs, rhs, relation) checks.
#: Lattice-class laws must hold exactly (joins, meets and sums of shared
#: inputs commute with IEEE rounding); ring-class laws involve products and
#: are allowed RING_TOL slack.
LAW_TABLE: tuple[tuple[str, str, Any], ...] = (
    ("riesz-1", "lattice", _pairs_riesz_1),
    ("riesz-1b", "lattice", _pairs_riesz_1b),
    ("riesz-2", "lattice", _pairs_riesz_2),
    ("riesz-3", "lattice", _pairs_riesz_3),
    ("riesz-4", "lattice", _pairs_riesz_4),
    ("riesz-4b", "lattice", _pairs_riesz_4b),
    ("riesz-5", "lattice", _pairs_riesz_5),
    ("riesz-6", "lattice", _pairs_riesz_6),
    ("riesz-6b", "lattice", _pairs_riesz_6b),
    ("riesz-6c", "lattice", _pairs_riesz_6c),
    ("riesz-6d", "lattice", _pairs_riesz_6d),
    ("riesz-6e", "lattice", _pairs_riesz_6e),
    ("falg-7", "ring", _pairs_falg_7),
    ("falg-8", "ring", _pairs_falg_8),
    ("falg-8b", "ring", _pairs_falg_8b),
    ("falg-8c", "ring", _pairs_falg_8c),
    ("falg-prod", "ring", _pairs_falg_prod),
    ("falg-9", "ring", _pairs_falg_9),
)

LAW_IDS = tuple(law_id for law_id, _, _ in LAW_TABLE)


def _check_one(lhs, rhs, relation: str, tol: float) -> tuple[bool, float]:
    if relation == "eq":
        if tol == 0.0:
            return lhs.equals(rhs), lhs.deviation(rhs)
        dev = lhs.deviation(rhs)
        return dev <= tol, dev
    # relation == "leq": measure the positive part of lhs - rhs.
    excess = positive_part(lhs - rhs)
    dev = excess.deviation(excess.zero())
    if tol == 0.0:
        return lhs.leq(rhs), dev
    return dev <= tol, dev


def _witness(lhs, rhs, sample_index: int) -> dict:
    out: dict = {"sample": sample_index, "atom": None, "lhs": None, "rhs": None}
    lv = getattr(lhs, "values", None)
    rv = getattr(rhs, "values", None)
    if lv is not None and rv is not None:
        import numpy as np

        diff = np.abs(np.asarray(lv) - np.asarray(rv))
        atom = int(np.argmax(diff))
        out.update(atom=atom, lhs=float(lv[atom]), rhs=float(rv[atom]))
    return out


def riesz_law_suite(
    samples: Iterable[tuple[Any, Any, Any]],
    law_ids: Sequence[str] | None = None,
    ring_tol: float = RING_TOL,
) -> LawReport:
    """Check the 18 Riesz and f-algebra identities on the given sample triples.

    Failures are reported as data (the first counterexample per law), not
    raised, so the suite doubles as a mutation-testing harness.  ``ring_tol``
    overrides the slack allowed on the product-mixed laws; lattice-only laws
    are always exact.
    """
    wanted = set(law_ids) if law_ids is not None else None
    table = [
        entry for entry in LAW_TABLE if wanted is None or entry[0] in wanted
    ]
    status: dict[str, LawResult] = {
        law_id: LawResult(law_id, True, None) for law_id, _, _ in table
    }
    for k, (u, v, w) in enumerate(samples):
        for law_id, klass, evaluate in table:
            if not status[law_id].passed:
                continue
            tol = 0.0 if klass == "lattice" else ring_tol
            for lhs, rhs, relation in evaluate(u, v, w):
                ok, _ = _check_one(lhs, rhs, relation, tol)
                if not ok:
                    status[law_id] = LawResult(law_id, False, _witness(lhs, rhs, k))
                    break
    return LawReport(tuple(status[law_id] for law_id, _, _ in table))
