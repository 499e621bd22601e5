"""Inner-product fiber modules: projections, complements, Riesz duality."""

import math

import numpy as np
import pytest

from rieszmod import (
    BallSet,
    BoxSet,
    ConvexSet,
    DualSystem,
    EmptySet,
    FiniteFStructure,
    HilbertModule,
    Kind,
    InputError,
    IntersectionSet,
    ModuleElement,
    ModuleMismatch,
    NotHilbert,
    Submodule,
    SubspaceSet,
    cauchy_schwarz_check,
    hilbert_reflexivity_check,
    module_distance,
    orthogonal_complement,
    parallelogram_defect,
    pointwise_inner,
    pointwise_norm,
    project_convex,
    riesz_inverse,
    riesz_map,
)
from helpers import (
    gram_module,
    lp_module,
    make_space,
    make_structure,
    random_element,
    random_spd,
)


def hilbert(n=1, dims=(2,), grams=None, structure=None):
    structure = structure or make_structure(n)
    if grams is None:
        return HilbertModule(lp_module(structure, dims, p=2.0))
    return HilbertModule(gram_module(structure, grams))


# --------------------------------------------------------------------------
# Inner products
# --------------------------------------------------------------------------

def test_pointwise_inner_oracles():
    m = gram_module(make_structure(1), [np.array([[2.0, 0.0], [0.0, 1.0]])])
    v = ModuleElement([[1.0, 1.0]], m)
    w = ModuleElement([[1.0, -1.0]], m)
    assert pointwise_inner(v, w).values.tolist() == [1.0]
    assert abs(pointwise_inner(v, v).values[0]
               - pointwise_norm(v).values[0] ** 2) <= 1e-12

    e = lp_module(make_structure(2), (2, 2), p=2.0)
    a = ModuleElement([[1.0, 0.0], [3.0, 0.0]], e)
    b = ModuleElement([[0.0, 1.0], [0.0, -2.0]], e)
    assert pointwise_inner(a, b).values.tolist() == [0.0, 0.0]


def test_pointwise_inner_rejects_non_inner_norms():
    m = lp_module(make_structure(1), (2,), p=1.0)
    v = ModuleElement([[1.0, 0.0]], m)
    with pytest.raises(NotHilbert):
        pointwise_inner(v, v)


def test_cauchy_schwarz_slack():
    m = lp_module(make_structure(1), (2,), p=2.0)
    v = ModuleElement([[3.0, 0.0]], m)
    ok, slack = cauchy_schwarz_check(v, v.scale(-2.0))
    assert ok and slack.values.tolist() == [0.0]
    w = ModuleElement([[0.0, 2.0]], m)
    ok, slack = cauchy_schwarz_check(v, w)
    assert ok and slack.values.tolist() == [6.0]
    rng = np.random.default_rng(199)
    g = gram_module(make_structure(3), [random_spd(rng, d) for d in (2, 3, 1)])
    for _ in range(100):
        a, b = random_element(rng, g), random_element(rng, g)
        ok, _ = cauchy_schwarz_check(a, b)
        assert ok


def test_parallelogram_defect_values():
    h = lp_module(make_structure(1), (2,), p=2.0)
    v = ModuleElement([[1.0, 0.0]], h)
    w = ModuleElement([[0.0, 1.0]], h)
    assert abs(parallelogram_defect(v, w).values[0]) <= 1e-12
    m1 = lp_module(make_structure(1), (2,), p=1.0)
    v1 = ModuleElement([[1.0, 0.0]], m1)
    w1 = ModuleElement([[0.0, 1.0]], m1)
    assert parallelogram_defect(v1, w1).values.tolist() == [4.0]


# --------------------------------------------------------------------------
# HilbertModule construction
# --------------------------------------------------------------------------

def test_hilbert_module_accepts_inner_product_fibers():
    rng = np.random.default_rng(211)
    h = hilbert(n=3, grams=[random_spd(rng, d) for d in (2, 3, 1)],
                structure=make_structure(3))
    assert h.compat_constant <= 1.0 + 1e-9
    h2 = HilbertModule(lp_module(make_structure(2), (2, 2), p=2.0))
    # The canonical lp pairing reproduces the module distance on the nose.
    assert abs(h2.compat_constant - 1.0) <= 1e-9


def test_hilbert_module_rejects_l1_fibers():
    with pytest.raises(NotHilbert):
        HilbertModule(lp_module(make_structure(1), (2,), p=1.0))


def test_hilbert_module_rejects_incompatible_pairing_scale():
    # Raw counting weights of total mass 4 on the pointwise distance make
    # the squared module distance up to 4 times the pairing distance.
    space = make_space(4, aux=[1.0, 1.0, 1.0, 1.0])
    structure = FiniteFStructure(space, Kind("Linf"), Kind("L0"))
    with pytest.raises(NotHilbert):
        HilbertModule(lp_module(structure, (2, 2, 2, 2), p=2.0))
    # Normalizing the same weights restores compatibility.
    ok_space = make_space(4, aux=[0.25, 0.25, 0.25, 0.25])
    ok = FiniteFStructure(ok_space, Kind("Linf"), Kind("L0"))
    h = HilbertModule(lp_module(ok, (2, 2, 2, 2), p=2.0))
    assert h.compat_constant <= 1.0 + 1e-9


def test_hilbert_module_handles_zero_fibers():
    h = HilbertModule(lp_module(make_structure(2), (0, 2), p=2.0))
    assert h.grams[0].shape == (0, 0)


# --------------------------------------------------------------------------
# Convex projections
# --------------------------------------------------------------------------

def test_project_subspace_oracle():
    h = hilbert()
    v = ModuleElement([[3.0, 4.0]], h.module)
    c = ConvexSet((SubspaceSet(np.array([[1.0, 0.0]])),))
    p = project_convex(v, c)
    assert p.vectors[0].tolist() == [3.0, 0.0]
    assert module_distance(v, p) == 4.0


def test_project_point_already_inside():
    h = hilbert()
    v = ModuleElement([[0.25, 0.5]], h.module)
    c = ConvexSet((BoxSet(np.zeros(2), np.ones(2)),))
    assert project_convex(v, c).vectors[0].tolist() == [0.25, 0.5]


def test_project_box_clamp_oracle():
    h = hilbert()
    v = ModuleElement([[2.0, 0.5]], h.module)
    c = ConvexSet((BoxSet(np.zeros(2), np.ones(2)),))
    assert project_convex(v, c).vectors[0].tolist() == [1.0, 0.5]


def test_project_ball_oracle():
    h = hilbert()
    v = ModuleElement([[3.0, 4.0]], h.module)
    c = ConvexSet((BallSet(np.zeros(2), 1.0),))
    assert np.allclose(project_convex(v, c).vectors[0], [0.6, 0.8])


def test_project_box_with_cross_terms():
    # With gram [[2,1],[1,1]] the nearest feasible point is not the clamp:
    # minimizing over x >= 0 from v = (1, -1) gives (0.5, 0).
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    h = hilbert(grams=[g])
    v = ModuleElement([[1.0, -1.0]], h.module)
    c = ConvexSet((BoxSet(np.zeros(2), np.full(2, math.inf)),))
    p = project_convex(v, c)
    assert np.allclose(p.vectors[0], [0.5, 0.0], atol=1e-10)


def test_project_intersection_oracle():
    h = hilbert()
    v = ModuleElement([[1.0, 0.0]], h.module)
    c = ConvexSet((IntersectionSet((
        BoxSet(np.zeros(2), np.ones(2)),
        SubspaceSet(np.array([[1.0, 1.0]])),
    )),))
    p = project_convex(v, c)
    assert np.allclose(p.vectors[0], [0.5, 0.5], atol=1e-9)


def test_empty_sets_are_rejected():
    with pytest.raises(EmptySet):
        BoxSet(np.ones(2), np.zeros(2))
    with pytest.raises(EmptySet):
        BallSet(np.zeros(2), -1.0)
    h = hilbert()
    v = ModuleElement([[1.0, 1.0]], h.module)
    disjoint = ConvexSet((IntersectionSet((
        BoxSet(np.zeros(2), np.zeros(2)),
        BoxSet(np.full(2, 2.0), np.full(2, 2.0)),
    )),))
    with pytest.raises(EmptySet):
        project_convex(v, disjoint)


def test_projection_variational_inequality():
    # <v - P(v), z - P(v)> <= 0 for every feasible z characterizes the
    # nearest point; checked on sampled feasible points of each set shape.
    rng = np.random.default_rng(223)
    g = random_spd(rng, 2)
    h = hilbert(grams=[g])
    sets = [
        ConvexSet((BoxSet(-np.ones(2), np.ones(2)),)),
        ConvexSet((BallSet(np.array([0.5, 0.0]), 0.75),)),
        ConvexSet((SubspaceSet(np.array([[2.0, 1.0]])),)),
        ConvexSet((IntersectionSet((
            BoxSet(-np.ones(2), np.ones(2)),
            BallSet(np.zeros(2), 1.2),
        )),)),
    ]
    for c in sets:
        for _ in range(25):
            v = ModuleElement([3.0 * rng.standard_normal(2)], h.module)
            p = project_convex(v, c).vectors[0]
            for _ in range(20):
                z = project_convex(
                    ModuleElement([3.0 * rng.standard_normal(2)], h.module), c
                ).vectors[0]
                lhs = float((v.vectors[0] - p) @ g @ (z - p))
                assert lhs <= 1e-8 * max(1.0, abs(lhs))


def test_convex_set_json_round_trip():
    c = ConvexSet((
        SubspaceSet(np.array([[1.0, 0.0]])),
        BoxSet(np.array([0.0, -math.inf]), np.array([1.0, math.inf])),
        IntersectionSet((BallSet(np.zeros(1), 2.0), BoxSet(np.zeros(1), np.ones(1)))),
    ))
    back = ConvexSet.from_json(c.to_json())
    assert back.to_json() == c.to_json()
    with pytest.raises(InputError):
        ConvexSet.from_json({"fibers": [{"kind": "cone"}]})
    with pytest.raises(InputError):
        ConvexSet.from_json({"fibers": [{"kind": "box", "lo": [1.0], "hi": [0.0]}]})
    with pytest.raises(InputError):
        ConvexSet.from_json({"fibers": [{"kind": "intersection", "parts": []}]})


# --------------------------------------------------------------------------
# Orthogonal complements
# --------------------------------------------------------------------------

def test_orthogonal_complement_oracle():
    h = hilbert()
    n = Submodule(h.module, (np.array([[1.0, 1.0]]),))
    comp = orthogonal_complement(n)
    direction = comp.bases[0][0]
    assert abs(direction @ np.array([1.0, 1.0])) <= 1e-12
    whole = Submodule(h.module, (np.eye(2),))
    assert orthogonal_complement(whole).bases[0].shape == (0, 2)
    zero = Submodule(h.module, (np.zeros((0, 2)),))
    assert np.array_equal(orthogonal_complement(zero).bases[0], np.eye(2))


def test_orthogonal_complement_uses_the_gram_inner_product():
    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    h = hilbert(grams=[g])
    n = Submodule(h.module, (np.array([[1.0, 0.0]]),))
    direction = orthogonal_complement(n).bases[0][0]
    assert abs(np.array([1.0, 0.0]) @ g @ direction) <= 1e-12


def test_projection_residual_is_orthogonal_with_pythagoras():
    rng = np.random.default_rng(227)
    grams = [random_spd(rng, 3), random_spd(rng, 2)]
    h = hilbert(n=2, grams=grams, structure=make_structure(2))
    n = Submodule(h.module, (rng.standard_normal((2, 3)), rng.standard_normal((1, 2))))
    for _ in range(50):
        v = random_element(rng, h.module)
        c = ConvexSet(tuple(SubspaceSet(b) for b in n.bases))
        p = project_convex(v, c)
        resid = v - p
        for a, b in enumerate(n.bases):
            for row in b:
                assert abs(resid.vectors[a] @ grams[a] @ row) <= 1e-10
        lhs = pointwise_norm(v).values ** 2
        rhs = pointwise_norm(p).values ** 2 + pointwise_norm(resid).values ** 2
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, float(np.max(lhs)))


# --------------------------------------------------------------------------
# Riesz representation
# --------------------------------------------------------------------------

def test_riesz_map_oracles():
    h = hilbert()
    w = ModuleElement([[3.0, 4.0]], h.module)
    eta = riesz_map(h, w)
    assert eta.vectors[0].tolist() == [3.0, 4.0]

    g = np.array([[2.0, 1.0], [1.0, 1.0]])
    hg = hilbert(grams=[g])
    eta = riesz_map(hg, ModuleElement([[1.0, 0.0]], hg.module))
    assert eta.vectors[0].tolist() == [2.0, 1.0]


def test_riesz_map_is_isometric_and_invertible():
    rng = np.random.default_rng(229)
    grams = [random_spd(rng, d) for d in (2, 3, 1)]
    h = hilbert(n=3, grams=grams, structure=make_structure(3))
    for _ in range(100):
        w = random_element(rng, h.module)
        eta = riesz_map(h, w)
        nw = pointwise_norm(w)
        assert pointwise_norm(eta).deviation(nw) <= 1e-10 * max(1.0, nw.sup_abs)
        back = riesz_inverse(h, eta)
        assert module_distance(back, w) <= 1e-10 * max(1.0, nw.sup_abs)


def test_riesz_pairing_identity():
    rng = np.random.default_rng(233)
    h = hilbert(grams=[random_spd(rng, 3)])
    for _ in range(50):
        v, w = random_element(rng, h.module), random_element(rng, h.module)
        eta = riesz_map(h, w)
        lhs = float(eta.vectors[0] @ v.vectors[0])
        rhs = pointwise_inner(v, w).values[0]
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_riesz_map_rejects_foreign_elements():
    h = hilbert()
    other = lp_module(make_structure(2), (2, 2), p=2.0)
    with pytest.raises(ModuleMismatch):
        riesz_map(h, other.zero_element())
    # An l^2 module is its own dual, so use a gram module to tell the two
    # sides apart: its dual carries the inverse gram.
    hg = hilbert(grams=[np.array([[2.0, 1.0], [1.0, 1.0]])])
    with pytest.raises(ModuleMismatch):
        riesz_inverse(hg, hg.module.zero_element())


# --------------------------------------------------------------------------
# Reflexivity
# --------------------------------------------------------------------------

def test_hilbert_reflexivity():
    rng = np.random.default_rng(239)
    assert hilbert_reflexivity_check(hilbert(), samples=200)
    grams = [random_spd(rng, d) for d in (2, 0, 3)]
    h = hilbert(n=3, grams=grams, structure=make_structure(3))
    assert hilbert_reflexivity_check(h, samples=200)
