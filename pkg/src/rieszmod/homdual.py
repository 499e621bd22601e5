"""Homomorphisms between fiber modules, dual modules, and extension theorems.

Homs are stored as one matrix per atom; the pointwise operator norm makes
Hom(M, N) itself a fiber module.  Duals are Hom into the scalar fibers of the
pairing space Z, with closed-form dual norms for lp and gram fibers.  The
Hahn-Banach extension iterates the one-dimensional step over a deterministic
basis completion, computing each infimum through its dual program over the
gauge's dual ball (a linear program for polyhedral gauges, a closed form for
euclidean ones) with convex line-search descent for the remaining smooth
gauges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    DimensionMismatch,
    DominationViolated,
    InconsistentGenerators,
    InputError,
    ModuleMismatch,
    UnsupportedHom,
)
from .modules import (
    Fiber,
    FiberModule,
    FiberNorm,
    GramNorm,
    ImageLpNorm,
    LpNorm,
    ModuleElement,
    Submodule,
    _golden_section,
    kernel_basis,
    matrix_rank,
)
from .spaces import DualSystem, FiniteFStructure, Fn, _require

#: Seed for the deterministic restarts used by the operator-norm ascent.
_ASCENT_SEED = 20240817


@dataclass(frozen=True)
class StructureHom:
    """A homomorphism of f-structures given by precomposition with an atom map.

    ``atom_map[t]`` is the index of the source atom that target atom ``t``
    reads from, so ``apply(f)(t) = f(atom_map[t])``.  Such maps preserve the
    unit, products, and lattice operations by construction.  A general
    positive unital matrix may be supplied instead, but every construction in
    this package rejects it; only precompositions are implemented.
    """

    source: FiniteFStructure
    target: FiniteFStructure
    atom_map: tuple[int, ...] | None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.atom_map is None) == (self.matrix is None):
            raise InputError("exactly one of atom_map and matrix must be given")
        if self.atom_map is not None:
            if len(self.atom_map) != self.target.space.n:
                raise DimensionMismatch("atom_map needs one source atom per target atom")
            if any(not 0 <= i < self.source.space.n for i in self.atom_map):
                raise InputError("atom_map index out of range")

    def _precomposition(self) -> tuple[int, ...]:
        if self.atom_map is None:
            raise UnsupportedHom(
                "general matrix homomorphisms are accepted as data but not implemented;"
                " use an atom_map precomposition"
            )
        return self.atom_map

    @classmethod
    def identity(cls, structure: FiniteFStructure) -> "StructureHom":
        return cls(structure, structure, tuple(range(structure.space.n)))

    def apply(self, f: Fn) -> Fn:
        amap = self._precomposition()
        if f.space != self.source.space:
            raise ModuleMismatch("argument lives on the wrong measure space")
        return Fn(f.values[list(amap)], self.target.space)

    def compose(self, other: "StructureHom") -> "StructureHom":
        """self after other (other: A -> B, self: B -> C)."""
        amap = self._precomposition()
        omap = other._precomposition()
        if other.target != self.source:
            raise ModuleMismatch("homs are not composable")
        return StructureHom(other.source, self.target, tuple(omap[i] for i in amap))


class HomElement:
    """A module homomorphism: one fiber matrix per atom.

    With a structure hom attached, the matrix at target atom t maps the
    source fiber at ``atom_map[t]`` into the target fiber at t (a phi-linear
    map); otherwise source and target share the measure space.
    """

    __slots__ = ("matrices", "source", "target", "hom")

    def __init__(self, matrices: Sequence[np.ndarray | Sequence[Sequence[float]]],
                 source: FiberModule, target: FiberModule,
                 hom: StructureHom | None = None):
        amap = hom._precomposition() if hom is not None else range(target.space.n)
        if hom is None and source.space != target.space:
            raise ModuleMismatch("source and target live on different spaces; pass a hom")
        if len(matrices) != target.space.n:
            raise DimensionMismatch("one matrix per target atom is required")
        fixed = []
        for t, m in enumerate(matrices):
            src_dim = source.fibers[amap[t]].dim
            tgt_dim = target.fibers[t].dim
            arr = np.array(m, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(tgt_dim, src_dim)
            if arr.shape != (tgt_dim, src_dim):
                raise DimensionMismatch(
                    f"matrix at atom {t} has shape {arr.shape}, expected {(tgt_dim, src_dim)}"
                )
            arr.setflags(write=False)
            fixed.append(arr)
        self.matrices = tuple(fixed)
        self.source = source
        self.target = target
        self.hom = hom

    def _amap(self) -> Sequence[int]:
        return self.hom._precomposition() if self.hom is not None else range(self.target.space.n)

    def __repr__(self) -> str:
        return f"HomElement({[m.tolist() for m in self.matrices]!r})"

    def apply(self, v: ModuleElement) -> ModuleElement:
        if not v.module.same_module(self.source):
            raise ModuleMismatch("argument lives in the wrong module")
        amap = self._amap()
        return ModuleElement(
            [m @ v.vectors[amap[t]] for t, m in enumerate(self.matrices)], self.target
        )

    def __add__(self, other: "HomElement") -> "HomElement":
        if not isinstance(other, HomElement):
            return NotImplemented
        return HomElement([a + b for a, b in zip(self.matrices, other.matrices)],
                          self.source, self.target, self.hom)

    def __sub__(self, other: "HomElement") -> "HomElement":
        if not isinstance(other, HomElement):
            return NotImplemented
        return HomElement([a - b for a, b in zip(self.matrices, other.matrices)],
                          self.source, self.target, self.hom)

    def __neg__(self) -> "HomElement":
        return HomElement([-a for a in self.matrices], self.source, self.target, self.hom)

    def scale(self, lam: float) -> "HomElement":
        return HomElement([a * float(lam) for a in self.matrices],
                          self.source, self.target, self.hom)

    def __rmul__(self, u: Fn) -> "HomElement":
        if not isinstance(u, Fn):
            return NotImplemented
        if u.space != self.target.space:
            raise ModuleMismatch("multiplier lives on a different measure space")
        return HomElement([u.values[t] * m for t, m in enumerate(self.matrices)],
                          self.source, self.target, self.hom)

    def compose(self, other: "HomElement") -> "HomElement":
        """self after other; only same-space homs compose here."""
        if self.hom is not None or other.hom is not None:
            raise UnsupportedHom("composition across structure homs is not implemented")
        if not other.target.same_module(self.source):
            raise ModuleMismatch("homs are not composable")
        return HomElement([a @ b for a, b in zip(self.matrices, other.matrices)],
                          other.source, self.target)

    @classmethod
    def identity(cls, m: FiberModule) -> "HomElement":
        return cls([np.eye(f.dim) for f in m.fibers], m, m)

    @classmethod
    def zero(cls, source: FiberModule, target: FiberModule,
             hom: StructureHom | None = None) -> "HomElement":
        amap = hom._precomposition() if hom is not None else range(target.space.n)
        return cls(
            [np.zeros((target.fibers[t].dim, source.fibers[amap[t]].dim))
             for t in range(target.space.n)],
            source, target, hom,
        )

    def to_json(self) -> dict:
        return {"matrices": [[[float(x) for x in row] for row in m] for m in self.matrices]}

    @classmethod
    def from_json(cls, obj: Any, source: FiberModule, target: FiberModule,
                  where: str = "$") -> "HomElement":
        _require(isinstance(obj, dict) and "matrices" in obj,
                 "hom must be {\"matrices\": [[[...]], ...]}", where)
        try:
            return cls(obj["matrices"], source, target)
        except (DimensionMismatch, ValueError) as exc:
            raise InputError(str(getattr(exc, "message", exc)), path=where + ".matrices") from exc


# --------------------------------------------------------------------------
# Dual norms and operator norms
# --------------------------------------------------------------------------

def _lp_conjugate(p: float) -> float:
    if p == 1.0:
        return math.inf
    if p == math.inf:
        return 1.0
    return p / (p - 1.0)


def _norm_subgradient(norm: FiberNorm, y: np.ndarray) -> np.ndarray:
    """A subgradient of the norm at y (the zero vector at y = 0)."""
    n = norm.norm(y)
    if n == 0.0 or y.size == 0:
        return np.zeros_like(y)
    if isinstance(norm, GramNorm):
        return norm.gram @ y / n
    if isinstance(norm, ImageLpNorm):
        return norm.matrix.T @ _norm_subgradient(LpNorm(norm.p), norm.matrix @ y)
    p = norm.p
    if p == 1.0:
        return np.sign(y)
    if p == math.inf:
        i = int(np.argmax(np.abs(y)))
        g = np.zeros_like(y)
        g[i] = np.sign(y[i])
        return g
    return np.sign(y) * np.abs(y) ** (p - 1.0) / n ** (p - 1.0)


def dual_vector_norm(norm: FiberNorm, a: np.ndarray) -> float:
    """sup { a.x : norm(x) <= 1 }, the dual norm of the row vector a."""
    if a.size == 0:
        return 0.0
    if isinstance(norm, LpNorm):
        return LpNorm(_lp_conjugate(norm.p)).norm(a)
    if isinstance(norm, GramNorm):
        return float(math.sqrt(max(0.0, float(a @ np.linalg.solve(norm.gram, a)))))
    # Generic fallback: one-row operator norm into the absolute value.
    return _operator_norm_ascent(norm, LpNorm(1.0), a.reshape(1, -1))


def _operator_norm_ascent(src: FiberNorm, tgt: FiberNorm, a: np.ndarray) -> float:
    """max of tgt(A x) over src(x) = 1 by projected subgradient ascent.

    Deterministic: 32 restarts drawn from a fixed seed, tolerance 1e-8.
    The objective is a maximum of a convex function over the unit sphere, so
    every local ray maximum is global along its ray; restarts guard against
    sphere-level local maxima.
    """
    n = a.shape[1]
    if n == 0 or a.shape[0] == 0:
        return 0.0
    rng = np.random.default_rng(_ASCENT_SEED)
    starts = [np.eye(n)[i] for i in range(n)]
    starts += [rng.standard_normal(n) for _ in range(32)]
    best = 0.0
    for x0 in starts:
        s = src.norm(x0)
        if s == 0.0:
            continue
        x = x0 / s
        val = tgt.norm(a @ x)
        for k in range(1, 201):
            g = a.T @ _norm_subgradient(tgt, a @ x)
            step = 0.5 / math.sqrt(k)
            y = x + step * g
            sy = src.norm(y)
            if sy == 0.0:
                break
            y = y / sy
            vy = tgt.norm(a @ y)
            if vy > val:
                x, prev, val = y, val, vy
                if vy - prev <= 1e-8 * max(1.0, vy) and k > 20:
                    break
            else:
                x = y if vy == val else x
        best = max(best, val)
    return best


def _sqrtm_spd(g: np.ndarray) -> np.ndarray:
    w, q = np.linalg.eigh(g)
    return q @ np.diag(np.sqrt(np.maximum(w, 0.0))) @ q.T


def _as_gram(norm: FiberNorm, dim: int) -> np.ndarray | None:
    if isinstance(norm, GramNorm):
        return norm.gram
    if isinstance(norm, LpNorm) and norm.p == 2.0:
        return np.eye(dim)
    if isinstance(norm, ImageLpNorm) and norm.p == 2.0:
        return norm.matrix.T @ norm.matrix
    return None


def _fiber_operator_norm(src: FiberNorm, src_dim: int,
                         tgt: FiberNorm, tgt_dim: int, a: np.ndarray) -> float:
    """Operator norm of the matrix a between two fiber norms.

    Closed forms: zero fibers; one-dimensional targets (dual norm of the
    row); l1 sources (max over columns); l-infinity sources (sign-pattern
    enumeration); gram-to-gram (whitened spectral norm).  Everything else
    falls back to the seeded ascent.
    """
    if src_dim == 0 or tgt_dim == 0 or not a.any():
        return 0.0
    tgt_scale = tgt.norm(np.ones(1)) if tgt_dim == 1 else None
    if tgt_dim == 1:
        if isinstance(src, (LpNorm, GramNorm)):
            return tgt_scale * dual_vector_norm(src, a[0])
    if isinstance(src, LpNorm) and src.p == 1.0:
        return max(tgt.norm(a[:, j]) for j in range(src_dim))
    if isinstance(src, LpNorm) and src.p == math.inf and src_dim <= 16:
        best = 0.0
        for bits in range(2 ** (src_dim - 1)):
            signs = np.array(
                [1.0] + [1.0 if (bits >> i) & 1 == 0 else -1.0 for i in range(src_dim - 1)]
            )
            best = max(best, tgt.norm(a @ signs))
        return best
    g_src = _as_gram(src, src_dim)
    g_tgt = _as_gram(tgt, tgt_dim)
    if g_src is not None and g_tgt is not None:
        white = _sqrtm_spd(g_tgt) @ a @ np.linalg.inv(_sqrtm_spd(g_src))
        return float(np.linalg.norm(white, 2))
    return _operator_norm_ascent(src, tgt, a)


def hom_norm(t: HomElement) -> Fn:
    """The pointwise operator norm of a hom, as a function on the space.

    Atomwise this is sup { |T v| : |v| <= 1 } on the fiber, which coincides
    with the least pointwise bound w with |T v| <= w |v|.
    """
    amap = t._amap()
    vals = []
    for i, m in enumerate(t.matrices):
        src = t.source.fibers[amap[i]]
        tgt = t.target.fibers[i]
        vals.append(_fiber_operator_norm(src.norm, src.dim, tgt.norm, tgt.dim, m))
    return Fn(vals, t.target.space)


def _dual_fiber_norm(norm: FiberNorm) -> FiberNorm:
    if isinstance(norm, LpNorm):
        return LpNorm(_lp_conjugate(norm.p))
    if isinstance(norm, GramNorm):
        if norm.gram.size == 0:
            return GramNorm(norm.gram)
        return GramNorm(np.linalg.inv(norm.gram))
    raise UnsupportedHom(
        "dual fibers are implemented for lp and gram norms; generated-module"
        " fibers with p != 2 have no closed dual in this package"
    )


def z_module(system: DualSystem) -> FiberModule:
    """The pairing space Z realized as a module: scalar fibers with |.|"""
    structure = FiniteFStructure(system.space, system.base.u_kind, system.z_kind)
    return FiberModule(structure, tuple(Fiber(1, LpNorm(1.0)) for _ in range(system.space.n)))


def dual_module(m: FiberModule, system: DualSystem) -> FiberModule:
    """Hom(M, Z) as a W-normed module: dual fibers with dual norms."""
    structure = FiniteFStructure(system.space, m.structure.u_kind, system.w_kind)
    return FiberModule(
        structure, tuple(Fiber(f.dim, _dual_fiber_norm(f.norm)) for f in m.fibers)
    )


def dual_element(m: FiberModule, rows: Sequence[Sequence[float]],
                 system: DualSystem) -> HomElement:
    """A functional on m as a HomElement into the scalar Z fibers."""
    return HomElement([np.array(r, dtype=float).reshape(1, -1) for r in rows],
                      m, z_module(system))


def pairing(omega: HomElement, v: ModuleElement) -> Fn:
    """<omega, v> as a function on the space (omega a functional on v's module)."""
    out = omega.apply(v)
    return Fn([vec[0] if vec.size else 0.0 for vec in out.vectors], omega.target.space)


def kernel(t: HomElement) -> Submodule:
    """Per atom, the null space of the fiber matrix, as a submodule."""
    if t.hom is not None:
        raise UnsupportedHom("kernels across structure homs are not implemented")
    return Submodule(t.source, tuple(kernel_basis(m) for m in t.matrices))


# --------------------------------------------------------------------------
# Convex minimization shared by the extension theorems
# --------------------------------------------------------------------------

def _minimize_convex(phi: Callable[[np.ndarray], float], k: int,
                     directions: Callable[[np.ndarray], list[np.ndarray]],
                     max_searches: int = 10_000, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Minimize a convex phi over R^k by golden-section line searches.

    Each line restriction of a convex function is unimodal, so golden
    section is exact up to the bracket; the bracket is grown geometrically
    to cover minimizers far from the current point (or to approximate an
    infimum attained only asymptotically, whose value a wide bracket already
    pins down to the tolerance).
    """
    t = np.zeros(k)
    best = phi(t)
    if k == 0:
        return t, best
    searches = 0
    while searches < max_searches:
        prev = best
        for d in directions(t):
            nd = float(np.linalg.norm(d))
            if nd == 0.0:
                continue
            d = d / nd

            def g(s: float) -> float:
                return phi(t + s * d)

            radius = 1.0
            while radius < 2.0 ** 40 and min(g(-radius), g(radius)) < best - 1e-15:
                radius *= 4.0
            s_star = _line_min(g, radius)
            searches += 1
            val = g(s_star)
            if val < best:
                best = val
                t = t + s_star * d
            if searches >= max_searches:
                break
        if prev - best <= tol * max(1.0, abs(prev)):
            break
    return t, best


def _line_min(g: Callable[[float], float], radius: float) -> float:
    """Argmin of a unimodal g on [-radius, radius], by staged golden sections.

    Re-bracketing keeps the final absolute tolerance small even when the
    initial bracket had to grow very wide.
    """
    lo, hi = -radius, radius
    for _ in range(3):
        width = hi - lo
        if width <= 4e-12:
            break
        s = _golden_section(g, lo, hi, max(1e-12, 1e-4 * width))
        step = 2e-4 * width
        lo, hi = s - step, s + step
    return 0.5 * (lo + hi)


def _extension_value(norm: FiberNorm, g: float, rows: np.ndarray,
                     r: np.ndarray, e: np.ndarray) -> float:
    """inf of g * norm(v + e) - f(v) over the row span, where f(rows) = r.

    Minimax duality turns the infimum into max { w.e : rows @ w = r,
    dual_norm(w) <= g }, a linear objective over a compact convex set, so the
    value is always attained and never overshoots domination.  Polyhedral
    gauges (p = 1 or p = infinity, plain or through an image matrix) solve
    that program as an exact linear program; euclidean gauges use the closed
    form for a linear functional over an affine slice of a ball.  Remaining
    gauges fall back to line-search descent on the primal, which is
    differentiable along v + e because e is independent of the rows.
    """
    if g == 0.0:
        return 0.0
    if isinstance(norm, LpNorm) and norm.p in (1.0, math.inf):
        return _polyhedral_dual_program(rows, r, e, g, norm.p)
    if isinstance(norm, ImageLpNorm) and norm.p in (1.0, math.inf):
        return _polyhedral_dual_program(
            rows @ norm.matrix.T, r, norm.matrix @ e, g, norm.p
        )
    gram = _as_gram(norm, rows.shape[1])
    if gram is not None:
        return _ball_dual_program(gram, rows, r, e, g)
    kk = rows.shape[0]
    bt = rows.T

    def h(tt: np.ndarray) -> float:
        return g * norm.norm(bt @ tt + e) - float(r @ tt)

    def dirs(tt: np.ndarray) -> list[np.ndarray]:
        out = [np.eye(kk)[i] for i in range(kk)]
        out.append(rows @ _norm_subgradient(norm, bt @ tt + e) * g - r)
        return out

    _, val = _minimize_convex(h, kk, dirs)
    return val


def _polyhedral_dual_program(eq: np.ndarray, r: np.ndarray, obj: np.ndarray,
                             g: float, p: float) -> float:
    """max of obj.u over eq @ u = r and the polyhedral dual ball, as an LP.

    For p = 1 the dual ball is the box |u_i| <= g; for p = infinity it is
    sum |u_i| <= g, kept linear by splitting u into positive and negative
    parts.  Infeasibility certifies that no dominated extension exists.
    """
    m = obj.size
    a_eq = eq if eq.shape[0] else None
    b_eq = r if eq.shape[0] else None
    if p == 1.0:
        res = linprog(-obj, A_eq=a_eq, b_eq=b_eq, bounds=[(-g, g)] * m,
                      method="highs")
    else:
        split_eq = np.hstack([a_eq, -a_eq]) if a_eq is not None else None
        res = linprog(np.concatenate([-obj, obj]),
                      A_ub=np.ones((1, 2 * m)), b_ub=np.array([g]),
                      A_eq=split_eq, b_eq=b_eq,
                      bounds=[(0.0, None)] * (2 * m), method="highs")
    if res.status == 2:
        raise DominationViolated("functional exceeds the gauge on the extension domain")
    if not res.success:
        raise RuntimeError(f"extension linear program failed: {res.message}")
    return float(-res.fun)


def _ball_dual_program(gram: np.ndarray, rows: np.ndarray, r: np.ndarray,
                       e: np.ndarray, g: float) -> float:
    """max of w.e over rows @ w = r and the gram dual ball, in closed form.

    Whitening by the gram square root turns the constraint into a euclidean
    ball; the minimum-norm particular solution is orthogonal to the kernel of
    the whitened rows, so the feasible slice is a centered ball of radius
    sqrt(g^2 - |particular|^2) inside that kernel.
    """
    s = _sqrtm_spd(gram)
    a = rows @ s
    c = s @ e
    if rows.shape[0] == 0:
        return g * float(np.linalg.norm(c))
    q0 = np.linalg.pinv(a) @ r
    rho2 = g * g - float(q0 @ q0)
    if rho2 < -1e-9 * max(1.0, g * g):
        raise DominationViolated("functional exceeds the gauge on the extension domain")
    _, sv, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(sv > 1e-12 * sv[0])) if sv.size else 0
    null = vh[rank:]
    return float(c @ q0) + math.sqrt(max(rho2, 0.0)) * float(np.linalg.norm(null @ c))


# --------------------------------------------------------------------------
# Hahn-Banach
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Extension:
    """Result of a Hahn-Banach extension.

    ``functional`` is the extension as a row functional per atom;
    ``basis``/``values`` store the completed interpolation data, whose first
    rows are the submodule basis with the given values (restriction is exact
    by construction in this representation).
    """

    functional: HomElement
    basis: tuple[np.ndarray, ...]
    values: tuple[np.ndarray, ...]


def hahn_banach_extend(n: Submodule, f_rows: Sequence[Sequence[float]], gauge: Fn,
                       samples: int = 100) -> Extension:
    """Extend a dominated functional from a submodule to the whole module.

    ``f_rows[a]`` lists the values of the functional on the rows of
    ``n.bases[a]``; the gauge is p(v) = gauge(a) * |v| in each fiber.
    Domination of f by p on the submodule is prechecked on seeded samples
    (DominationViolated beyond 1e-9).  The extension iterates the
    one-dimensional step over the standard-basis completion in index order,
    each new value being the infimum of p(v + z) - f(v) over the current
    domain, computed through the dual program over the gauge's dual ball
    (exact for lp with p in {1, 2, infinity} and for gram gauges, convex
    descent otherwise).  Taking the infimum itself is the canonical
    tie-break among valid extensions.
    """
    m = n.module
    if gauge.space != m.space:
        raise ModuleMismatch("gauge lives on a different measure space")
    if np.any(gauge.values < 0.0):
        raise DominationViolated("gauge must be nonnegative")
    rng = np.random.default_rng(_ASCENT_SEED + 1)
    out_rows: list[np.ndarray] = []
    bases: list[np.ndarray] = []
    values: list[np.ndarray] = []
    for a, fiber in enumerate(m.fibers):
        b = np.array(n.bases[a], dtype=float)
        r = np.array(f_rows[a], dtype=float).reshape(-1)
        if r.shape[0] != b.shape[0]:
            raise DimensionMismatch(
                f"atom {a}: {b.shape[0]} basis rows but {r.shape[0]} functional values"
            )
        g_a = float(gauge.values[a])
        norm_a = fiber.norm.norm

        def f_of(tt: np.ndarray) -> float:
            return float(r @ tt)

        def p_of(x: np.ndarray) -> float:
            return g_a * norm_a(x)

        # Precheck f <= p on the subspace (both signs of each sample).
        k = b.shape[0]
        if k:
            pts = [np.eye(k)[j] for j in range(k)] + list(rng.standard_normal((samples, k)))
            for tt in pts:
                lhs, rhs = f_of(tt), p_of(b.T @ tt)
                if max(lhs, -lhs) > rhs + 1e-9 * max(1.0, rhs):
                    raise DominationViolated(
                        f"atom {a}: functional exceeds the gauge on the submodule"
                    )
        cur_b = [row for row in b]
        cur_r = [float(x) for x in r]
        for j in range(fiber.dim):
            e = np.eye(fiber.dim)[j]
            stacked = np.stack(cur_b) if cur_b else np.zeros((0, fiber.dim))
            if matrix_rank(np.vstack([stacked, e[None, :]])) == matrix_rank(stacked):
                continue
            bval = _extension_value(fiber.norm, g_a, stacked, np.array(cur_r), e)
            cur_b.append(e)
            cur_r.append(bval)
        if fiber.dim == 0:
            out_rows.append(np.zeros((1, 0)))
            bases.append(np.zeros((0, 0)))
            values.append(np.zeros(0))
            continue
        full_b = np.stack(cur_b)
        full_r = np.array(cur_r)
        omega = np.linalg.solve(full_b, full_r)
        out_rows.append(omega.reshape(1, -1))
        bases.append(full_b)
        values.append(full_r)
    system = DualSystem.default(m.structure)
    functional = HomElement(out_rows, m, z_module(system))
    return Extension(functional, tuple(bases), tuple(values))


def norming_functional(v: ModuleElement, system: DualSystem | None = None) -> HomElement:
    """The functional omega with <omega, v> = |v| and |omega| = chi_{v != 0}.

    Closed forms per fiber kind: the sign vector for l1, the first maximal
    coordinate for l-infinity, the (p-1)-power profile for finite p, and the
    Riesz row Gv/|v| for gram fibers.  Zero fibers get the zero functional.
    """
    m = v.module
    if system is None:
        system = DualSystem.default(m.structure)
    rows = []
    for fiber, x in zip(m.fibers, v.vectors):
        nrm = fiber.norm.norm(x)
        if nrm == 0.0 or fiber.dim == 0:
            rows.append(np.zeros((1, fiber.dim)))
            continue
        norm = fiber.norm
        if isinstance(norm, GramNorm):
            rows.append((norm.gram @ x / nrm).reshape(1, -1))
            continue
        if isinstance(norm, ImageLpNorm):
            y = norm.matrix @ x
            u = _attaining_row(norm.p, y, LpNorm(norm.p).norm(y))
            rows.append((norm.matrix.T @ u).reshape(1, -1))
            continue
        rows.append(_attaining_row(norm.p, x, nrm).reshape(1, -1))
    return HomElement(rows, m, z_module(system))


def _attaining_row(p: float, x: np.ndarray, nrm: float) -> np.ndarray:
    if p == 1.0:
        return np.sign(x)
    if p == math.inf:
        i = int(np.argmax(np.abs(x)))
        row = np.zeros_like(x)
        row[i] = math.copysign(1.0, x[i])
        return row
    if p == 2.0:
        return x / nrm
    return np.sign(x) * np.abs(x) ** (p - 1.0) / nrm ** (p - 1.0)


# --------------------------------------------------------------------------
# Bidual
# --------------------------------------------------------------------------

def bidual_embed(m: FiberModule, system: DualSystem | None = None) -> HomElement:
    """The canonical map J: M -> M** defined by <J(v), omega> = <omega, v>.

    In fiber coordinates the double dual of a finite-dimensional space is the
    space itself, so J is the identity matrix per atom; the content is that
    the double-dual norm agrees with the original (tested independently).
    """
    if system is None:
        system = DualSystem.default(m.structure)
    dual = dual_module(m, system)
    inverted = DualSystem(
        FiniteFStructure(system.space, system.base.u_kind, system.w_kind),
        system.base.v_kind, system.z_kind,
    )
    bidual = dual_module(dual, inverted)
    return HomElement([np.eye(f.dim) for f in m.fibers], m, bidual)


def is_reflexive(m: FiberModule, system: DualSystem | None = None) -> bool:
    """True iff J is surjective: every bidual element has a preimage.

    Finite-dimensional fibers are always reflexive; the witness solves the
    fiber systems explicitly rather than citing the dimension count.
    """
    j = bidual_embed(m, system)
    rng = np.random.default_rng(_ASCENT_SEED + 2)
    for _ in range(8):
        target = [rng.standard_normal(f.dim) for f in j.target.fibers]
        for mat, y in zip(j.matrices, target):
            if mat.shape[0] != mat.shape[1]:
                return False
            x = np.linalg.solve(mat, y) if mat.size else np.zeros(0)
            if mat.size and not np.allclose(mat @ x, y, atol=1e-9):
                return False
    return True


# --------------------------------------------------------------------------
# Extension from generators
# --------------------------------------------------------------------------

def extend_from_generators(
    generators: Sequence[ModuleElement],
    images: Sequence[ModuleElement],
    target: FiberModule,
    phi: StructureHom | None = None,
) -> HomElement:
    """The unique hom sending each generator to its image.

    Per target atom t the fiber matrix solves T_t g_i[amap(t)] = img_i[t]
    for all i by least squares; a residual beyond 1e-9 (relative) means the
    images are inconsistent with linearity.  Directions outside the span of
    the generators are sent to zero, the canonical choice on the generated
    submodule's complement.
    """
    if len(generators) != len(images):
        raise InputError("one image per generator is required")
    if len(generators) == 0:
        raise InputError("extend_from_generators needs at least one generator")
    source = generators[0].module
    amap = phi._precomposition() if phi is not None else range(target.space.n)
    matrices = []
    for t in range(target.space.n):
        s = amap[t]
        g = np.stack([gen.vectors[s] for gen in generators])
        img = np.stack([im.vectors[t] for im in images])
        if g.shape[1] == 0:
            if np.any(np.abs(img) > 1e-9):
                raise InconsistentGenerators(
                    f"atom {t}: zero source fiber with nonzero images"
                )
            matrices.append(np.zeros((target.fibers[t].dim, 0)))
            continue
        sol, *_ = np.linalg.lstsq(g, img, rcond=None)
        resid = g @ sol - img
        scale = max(1.0, float(np.abs(img).max()))
        if np.any(np.abs(resid) > 1e-9 * scale):
            raise InconsistentGenerators(
                f"atom {t}: generator images are not consistent with a linear map"
            )
        matrices.append(sol.T)
    return HomElement(matrices, source, target, phi)
