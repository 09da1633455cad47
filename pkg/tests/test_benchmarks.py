import numpy as np
import pytest

from usemoc.benchmarks import BENCHMARKS, capacitance, evaluate_benchmark, get_benchmark, make_problem
from usemoc.engine import BLACKBOX, COMPOSITE, WHITEBOX, evaluate
from usemoc.errors import ConfigurationError, InputError
from usemoc.pareto import hypervolume, pareto_filter


def test_bnh_at_origin():
    Y, C = evaluate_benchmark("bnh", [0.0, 0.0])
    np.testing.assert_allclose(Y, [0.0, 50.0])
    # (x1 - 5)^2 + x2^2 = 25 exactly, so g1 = 0 (active)
    assert C[0] == 0.0
    assert np.all(C <= 0)


def test_srn_and_tnk_known_points():
    Y, C = evaluate_benchmark("srn", [0.0, 0.0])
    np.testing.assert_allclose(Y, [2 + 4 + 1, 0 - 1])
    np.testing.assert_allclose(C, [-225.0, 10.0])
    Y, C = evaluate_benchmark("tnk", [1.0, 1.0])
    np.testing.assert_allclose(Y, [1.0, 1.0])


def test_tnk_sinusoidal_constraint_violation():
    # near the origin x1^2 + x2^2 - 1 - 0.1 cos(...) < 0, so g1 > 0
    _, C = evaluate_benchmark("tnk", [0.3, 0.3])
    assert C[0] > 0
    prob = make_problem("tnk", budget=5, n_init=2)
    rec = evaluate(prob, np.array([0.3, 0.3]), 0, "initial")
    assert not rec.feasible


def test_mock_vr_capacitance_at_unit_design():
    x = np.ones(32)
    assert capacitance(x) == pytest.approx(8 * (1.955 + 1.08))
    assert capacitance(x) == pytest.approx(24.28)


def test_out_of_box_rejected():
    with pytest.raises(InputError):
        evaluate_benchmark("bnh", [6.0, 0.0])
    with pytest.raises(InputError):
        evaluate_benchmark("bnh", [1.0, 1.0, 1.0])
    with pytest.raises(ConfigurationError):
        get_benchmark("zdt1")


@pytest.mark.parametrize("name", sorted(BENCHMARKS))
def test_random_in_box_points_are_finite(name):
    b = get_benchmark(name)
    rng = np.random.default_rng(0)
    lo, hi = b.bounds[:, 0], b.bounds[:, 1]
    X = np.vstack([lo + rng.random((200, b.dim)) * (hi - lo), lo, hi])
    for x in X:
        Y, C = b.evaluate(x)
        assert Y.shape == (len(b.objective_names),) and C.shape == (len(b.constraints),)
        assert np.all(np.isfinite(Y)) and np.all(np.isfinite(C))
    # vectorized evaluation agrees with pointwise evaluation
    Yv, Cv = b.evaluate(X)
    np.testing.assert_allclose(Yv[0], b.evaluate(X[0])[0])
    np.testing.assert_allclose(Cv[0], b.evaluate(X[0])[1])


@pytest.mark.parametrize("name", ["bnh", "srn"])
def test_analytic_front_beats_random_sampling(name):
    b = get_benchmark(name)
    F = b.pareto_front(6000)
    rng = np.random.default_rng(1)
    lo, hi = b.bounds[:, 0], b.bounds[:, 1]
    X = lo + rng.random((20000, 2)) * (hi - lo)
    Y, C = b.evaluate(X)
    feas = np.all(C <= 0, axis=1)
    ref = b.reference_point
    inside = feas & np.all(Y < ref, axis=1)
    # random feasible points never reach beyond the analytic front
    assert hypervolume(Y[inside], ref) <= hypervolume(F, ref) * (1 + 1e-6)


def _dense_front(b, n=400):
    lo, hi = b.bounds[:, 0], b.bounds[:, 1]
    g = [np.linspace(lo[j], hi[j], n) for j in range(2)]
    X = np.stack(np.meshgrid(*g), axis=-1).reshape(-1, 2)
    Y, C = b.evaluate(X)
    feas = np.all(C <= 0, axis=1)
    return Y[pareto_filter(Y, feas)]


@pytest.mark.parametrize("name", ["bnh", "srn", "tnk"])
def test_reference_points_dominated_by_front(name):
    b = get_benchmark(name)
    F = _dense_front(b)
    assert np.all(F < b.reference_point)
    if b.pareto_front is not None:
        assert np.all(b.pareto_front(1000) < b.reference_point)


def test_make_problem_constraint_kinds():
    p = make_problem("bnh", budget=20)
    assert [c.kind for c in p.constraints] == [BLACKBOX, BLACKBOX]
    p = make_problem("bnh", budget=20, constraint_type=WHITEBOX)
    assert [c.kind for c in p.constraints] == [WHITEBOX, WHITEBOX]
    p = make_problem("mock_vr", budget=40, n_init=20)
    kinds = [c.kind for c in p.constraints]
    assert kinds[0] == WHITEBOX and all(k == COMPOSITE for k in kinds[1:])
    assert p.dim == 32 and p.k == 9 and p.reference_point is None
    with pytest.raises(ConfigurationError):
        make_problem("bnh", budget=20, constraint_type=COMPOSITE)


@pytest.mark.parametrize("ctype", [WHITEBOX, BLACKBOX])
def test_feasibility_agrees_with_closed_form(ctype):
    b = get_benchmark("srn")
    p = make_problem(b, budget=10, n_init=2, constraint_type=ctype)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-20, 20, (50, 2)):
        rec = evaluate(p, x, 0, "initial")
        _, C = b.evaluate(x)
        np.testing.assert_allclose(rec.C, C)
        assert rec.feasible == bool(np.all(C <= 0))


def test_mock_vr_band_constraint():
    b = get_benchmark("mock_vr", band=1.0)
    x = np.r_[np.ones(24), 0.5, 0.5, 1.0, 1.0, 100.0, 100.0, 100.0, 100.0]
    _, C = b.evaluate(x)
    assert C[0] == pytest.approx(abs(24.28 - 20.0) - 1.0)
    with pytest.raises(ConfigurationError):
        get_benchmark("mock_vr", band=0.0)


def test_mock_vr_random_feasibility_rate():
    b = get_benchmark("mock_vr")
    rng = np.random.default_rng(4)
    lo, hi = b.bounds[:, 0], b.bounds[:, 1]
    _, C = b.evaluate(lo + rng.random((5000, 32)) * (hi - lo))
    rate = np.mean(np.all(C <= 0, axis=1))
    # hard enough to need the constraints, easy enough for an LHS to hit
    assert 0.02 < rate < 0.6
