import json

import numpy as np
import pytest

from cycdr import geometry as g
from cycdr.geometry import project
from cycdr.instances import gen_balls, gen_x0
from cycdr.operators import (
    AlternatingProjections,
    AveragedDR,
    CyclicDR,
    NonFiniteIterateError,
    Operator,
    Projection,
    Termination,
    TwoSetDR,
    averaged_step,
    compose,
    cyclic_step,
    dr_step,
    error_metric,
    iterate,
    map_step,
    relax,
)

from conftest import random_convex_set, random_subspace, random_unit

A = g.Hyperplane([1.0, 0.0], 0.0)
B = g.Hyperplane([0.6, 0.8], 0.0)


def hyperplane_reflect(a, x):
    # closed form for a unit normal through the origin
    return x - 2 * (a @ x) * a


def test_dr_step_worked_example():
    # R_A x = (-1, 1), R_B R_A x = (-1.24, 0.68)
    x = np.array([1.0, 1.0])
    rb_ra = hyperplane_reflect(B.normal, hyperplane_reflect(A.normal, x))
    np.testing.assert_allclose(rb_ra, [-1.24, 0.68], atol=1e-15)
    np.testing.assert_allclose(dr_step(A, B, x), [-0.12, 0.84], atol=1e-15)


def test_dr_step_fixes_common_points(rng):
    for _ in range(100):
        c = rng.normal(size=3)
        P = g.Ball(c + random_unit(rng, 3) * 0.5, 1.0)
        Q = g.Hyperplane(rng.normal(size=3), 0.0)
        Q = g.Hyperplane(Q.normal, Q.normal @ c)
        np.testing.assert_allclose(dr_step(P, Q, c), c, atol=1e-12)


def test_dr_step_of_affine_set_with_itself_is_identity(rng):
    for _ in range(100):
        S = random_subspace(rng, 4, int(rng.integers(0, 5)), anchor=rng.normal(size=4))
        x = rng.normal(size=4) * 3
        np.testing.assert_allclose(dr_step(S, S, x), x, atol=1e-12)


def test_cyclic_step_worked_example():
    # T_{2,1} applied to (-0.12, 0.84): R_B -> (-0.84, -0.12), R_A R_B -> (0.84, -0.12)
    y = np.array([-0.12, 0.84])
    np.testing.assert_allclose(hyperplane_reflect(B.normal, y), [-0.84, -0.12], atol=1e-15)
    x, subs = cyclic_step([A, B], [1, 1], record_substeps=True)
    np.testing.assert_allclose(x, [0.36, 0.36], atol=1e-15)
    assert len(subs) == 2
    np.testing.assert_allclose(subs[0], [-0.12, 0.84], atol=1e-15)


def test_cyclic_step_from_first_set_is_alternating_projections(rng):
    for _ in range(100):
        sets = [random_convex_set(rng, 3) for _ in range(int(rng.integers(2, 5)))]
        x = project(sets[0], rng.normal(size=3) * 4)
        ap = x
        for s in sets[1:] + sets[:1]:
            ap = project(s, ap)
        np.testing.assert_allclose(cyclic_step(sets, x)[0], ap, atol=1e-10)


def test_cyclic_step_fixes_feasible_points(rng):
    inst = gen_balls(5, 4, seed=3)
    z = np.zeros(5)
    np.testing.assert_array_equal(cyclic_step(inst.sets, z)[0], z)


def test_cycle_operators_need_two_sets():
    with pytest.raises(g.GeometryError):
        cyclic_step([A], [1, 1])
    with pytest.raises(g.GeometryError):
        averaged_step([A], [1, 1])
    with pytest.raises(g.GeometryError):
        CyclicDR([A])


def test_averaged_step_two_hyperplanes():
    # (T_{1,2}x + T_{2,1}x)/2 = ((-0.12,0.84) + (0.84,-0.12))/2
    np.testing.assert_allclose(averaged_step([A, B], [1, 1]), [0.36, 0.36], atol=1e-15)


def test_averaged_step_fixes_feasible_points():
    inst = gen_balls(4, 6, seed=1)
    np.testing.assert_array_equal(averaged_step(inst.sets, np.zeros(4)), np.zeros(4))


def test_averaged_and_cyclic_differ_for_three_hyperplanes():
    rng = np.random.default_rng(11)
    sets = [g.Hyperplane(rng.normal(size=3), 0.0) for _ in range(3)]
    x = rng.normal(size=3)
    assert np.linalg.norm(averaged_step(sets, x) - cyclic_step(sets, x)[0]) > 1e-6


def test_averaged_summands_share_the_input(rng):
    sets = [random_convex_set(rng, 3) for _ in range(4)]
    x = rng.normal(size=3) * 3
    manual = sum(dr_step(sets[i], sets[(i + 1) % 4], x) for i in range(4)) / 4
    np.testing.assert_allclose(averaged_step(sets, x), manual, atol=1e-14)


def test_map_step_examples():
    # P_A x = (0,1); then subtract <a2,(0,1)> a2 = 0.8 * (0.6, 0.8)
    np.testing.assert_allclose(map_step([A, B], [1, 1]), [-0.48, 0.36], atol=1e-15)
    ball = g.Ball([0, 0], 1)
    np.testing.assert_array_equal(map_step([ball], [3, 4]), project(ball, [3, 4]))
    np.testing.assert_array_equal(map_step([A, B], [0, 0]), [0, 0])


def test_relaxation_examples():
    P = Projection(g.Ball([0, 0], 1))
    x = np.array([3.0, 4.0])
    np.testing.assert_array_equal(relax(P, 0.0)(x), P(x))
    np.testing.assert_allclose(relax(P, 0.5)(x), [1.8, 2.4], atol=1e-15)
    inside = np.array([0.2, 0.3])
    for alpha in (0.0, 0.25, 0.9):
        np.testing.assert_allclose(relax(P, alpha)(inside), inside, atol=1e-15)


@pytest.mark.parametrize("alpha", [-0.1, 1.0, 1.5])
def test_relaxation_rejects_alpha_outside_unit_interval(alpha):
    with pytest.raises(ValueError):
        relax(Projection(A), alpha)


def test_compose_examples(rng):
    P = Projection(A)
    assert compose([P]) is P
    x = rng.normal(size=2)
    np.testing.assert_array_equal(compose([Projection(A), Projection(B)])(x), map_step([A, B], x))
    with pytest.raises(ValueError):
        compose([])


def test_composition_of_two_set_operators_is_cyclic(rng):
    for _ in range(50):
        sets = [random_convex_set(rng, 3) for _ in range(4)]
        ops = [TwoSetDR(sets[i], sets[(i + 1) % 4]) for i in range(4)]
        x = rng.normal(size=3) * 4
        np.testing.assert_allclose(compose(ops)(x), cyclic_step(sets, x)[0], atol=1e-14)


def test_error_metric_examples():
    # P_A x = (0,1), P_B x = (0.16,-0.12): 0.16^2 + 1.12^2
    assert error_metric([A, B], [1, 1]) == pytest.approx(1.28, abs=1e-14)
    assert error_metric([A], [1, 1]) == 0.0
    assert error_metric([A, B], [0, 0]) == 0.0


def test_iterate_two_lines_converges_to_origin():
    tr = iterate(CyclicDR([A, B]), [1, 1], eps=1e-9, max_iter=1000, record=True)
    assert tr.termination is Termination.CONVERGED
    assert np.linalg.norm(tr.final) < 1e-6
    assert len(tr.step_norms) == tr.iterations
    assert tr.step_norms[-1] < 1e-9
    assert len(tr.substeps) == 2 * tr.iterations
    assert len(tr.iterates) == tr.iterations + 1


def test_iterate_ball_and_interior_point():
    y = np.array([0.3, -0.5])
    tr = iterate(CyclicDR([g.Ball([0, 0], 1), g.Singleton(y)]), [3, 2], eps=1e-12)
    np.testing.assert_allclose(tr.final, y, atol=1e-6)


def test_iterate_ball_and_exterior_point_gives_best_approximation_pair():
    ball, point = g.Ball([0, 0], 1), g.Singleton([2, 0])
    tr = iterate(CyclicDR([ball, point]), [0.5, 1.5], eps=1e-12, max_iter=10000)
    assert tr.termination is Termination.CONVERGED
    np.testing.assert_allclose(project(ball, tr.final), [1, 0], atol=1e-6)
    np.testing.assert_array_equal(project(point, tr.final), [2, 0])
    # fixed points sit on the segment between the pair
    assert 1.0 - 1e-6 <= tr.final[0] <= 2.0 + 1e-6 and abs(tr.final[1]) < 1e-6


def test_iterate_stops_at_cap():
    tr = iterate(CyclicDR([A, B]), [1, 1], eps=1e-300, max_iter=7)
    assert tr.termination is Termination.ITERATION_CAP
    assert tr.iterations == 7 and len(tr.step_norms) == 7
    assert len(tr.iterates) == 2  # unrecorded: endpoints only


class _Overflow(Operator):
    dim = 2

    def apply(self, x, rng=None, record=False):
        with np.errstate(over="ignore"):
            return np.asarray(x) * 1e300, None


def test_iterate_reports_nonfinite_iterates():
    with pytest.raises(NonFiniteIterateError) as info:
        iterate(_Overflow(), [1.0, 1.0], eps=1e-3, max_iter=10)
    assert info.value.iteration == 2


def test_iterate_validates_arguments():
    op = CyclicDR([A, B])
    with pytest.raises(ValueError):
        iterate(op, [1, 1], eps=0)
    with pytest.raises(ValueError):
        iterate(op, [1, 1], eps=1e-3, max_iter=0)
    with pytest.raises(g.GeometryError):
        iterate(op, [1, 1, 1], eps=1e-3)
    with pytest.raises(g.GeometryError):
        iterate(op, [np.nan, 1], eps=1e-3)


def test_firm_nonexpansiveness_of_two_set_operator(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        S, T = random_convex_set(rng, n), random_convex_set(rng, n)
        x, y = rng.normal(size=n) * 5, rng.normal(size=n) * 5
        tx, ty = dr_step(S, T, x), dr_step(S, T, y)
        lhs = np.sum((tx - ty) ** 2) + np.sum(((x - tx) - (y - ty)) ** 2)
        assert lhs <= np.sum((x - y) ** 2) + 1e-9


def test_fixed_points_give_matching_shadows(rng):
    # at a fixed point of T_{S,T}, P_S x = P_T R_S x
    for _ in range(200):
        c = rng.normal(size=3)
        S = g.Ball(c + random_unit(rng, 3) * rng.uniform(0, 1), 1.0)
        T = g.Ball(c + random_unit(rng, 3) * rng.uniform(0, 1), 1.5)
        tr = iterate(TwoSetDR(S, T), rng.normal(size=3) * 4, eps=1e-14, max_iter=100000)
        x = tr.final
        delta = np.linalg.norm(dr_step(S, T, x) - x)
        assert delta <= 1e-12
        gap = np.linalg.norm(project(S, x) - project(T, g.reflect(S, x)))
        assert gap <= 2 * delta + 1e-15


@pytest.mark.parametrize("Op", [CyclicDR, AveragedDR])
def test_shadows_coincide_at_convergence(Op):
    eps = 1e-6
    for seed in range(10):
        inst = gen_balls(20, 5, seed)
        tr = iterate(Op(inst.sets), gen_x0(20, seed), eps, max_iter=5000)
        assert tr.termination is Termination.CONVERGED
        shadows = [project(s, tr.final) for s in inst.sets]
        spread = max(np.linalg.norm(p - q) for p in shadows for q in shadows)
        assert spread <= 10 * np.sqrt(eps)
        for p in shadows:
            for s in inst.sets:
                assert g.contains(s, p, 10 * np.sqrt(eps))


def test_trace_csv_and_json_layout():
    tr = iterate(CyclicDR([A, B]), [1, 1], eps=1e-3, record=True)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "iter,substep,coord_0,coord_1,step_norm"
    # x_0 row, then per pass one outer row and two sub-step rows
    assert len(lines) == 1 + 1 + 3 * tr.iterations
    assert lines[1].startswith("0,0,1.0,1.0,")
    first = lines[2].split(",")
    assert first[:2] == ["1", "0"] and float(first[-1]) == pytest.approx(tr.step_norms[0])
    doc = json.loads(tr.to_json())
    assert doc["termination"] == "converged"
    assert len(doc["rows"]) == len(lines) - 1
    sub = doc["rows"][2]
    assert (sub["iter"], sub["substep"], sub["step_norm"]) == (1, 1, None)
    np.testing.assert_allclose(sub["coords"], [-0.12, 0.84], atol=1e-15)


def test_operator_objects_match_functions(rng):
    sets = [random_convex_set(rng, 3) for _ in range(3)]
    x = rng.normal(size=3)
    np.testing.assert_array_equal(CyclicDR(sets)(x), cyclic_step(sets, x)[0])
    np.testing.assert_array_equal(AveragedDR(sets)(x), averaged_step(sets, x))
    np.testing.assert_array_equal(AlternatingProjections(sets)(x), map_step(sets, x))
    np.testing.assert_array_equal(TwoSetDR(sets[0], sets[1])(x), dr_step(sets[0], sets[1], x))
