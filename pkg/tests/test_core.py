import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mutsel import (
    Interval,
    InvalidArgument,
    ModelParams,
    MutationKernel,
    PopulationState,
    build_grid,
    eval_kernel,
    integrate,
    make_model,
)
from mutsel.core import kernel_at_zero, raw_kernel_mass, resolution_ok


def test_interval_requires_zero_inside():
    with pytest.raises(InvalidArgument):
        Interval(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        Interval(-1.0, math.inf)
    assert Interval(-1, 2).length == 3.0


def test_three_node_grid():
    g = build_grid(Interval(-1, 1), 3)
    assert g.nodes.tolist() == [-1.0, 0.0, 1.0]
    assert g.weights.tolist() == [0.5, 1.0, 0.5]


def test_reference_grid_spacing():
    g = build_grid(Interval(-1.5, 1.5), 1501)
    assert g.h == pytest.approx(0.002, rel=1e-14)
    assert g.weights.sum() == pytest.approx(3.0, rel=1e-12)


def test_asymmetric_grid_nodes():
    g = build_grid(Interval(-1, 2), 4)
    np.testing.assert_allclose(g.nodes, [-1, 0, 1, 2], atol=1e-15)


def test_grid_rejects_too_few_nodes():
    with pytest.raises(InvalidArgument):
        build_grid(Interval(-1, 1), 2)


@given(
    a=st.floats(-5, -0.01),
    b=st.floats(0.01, 5),
    n=st.integers(3, 400),
)
def test_grid_invariants(a, b, n):
    g = build_grid(Interval(a, b), n)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] == a and g.nodes[-1] == b
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - (b - a)) <= 1e-12 * (b - a)
    assert abs(g.nodes[g.zero_index]) <= 0.5 * g.h * (1 + 1e-12)


def test_integrate_examples():
    g = build_grid(Interval(-1, 1), 2001)
    assert integrate(g, np.ones(2001)) == pytest.approx(2.0, rel=1e-14)
    assert abs(integrate(g, g.nodes)) < 1e-15
    assert integrate(g, g.nodes**2) == pytest.approx(2 / 3, abs=1e-6)


def test_integrate_shape_mismatch():
    g = build_grid(Interval(-1, 1), 11)
    with pytest.raises(InvalidArgument):
        integrate(g, np.ones(10))


@given(
    a=st.floats(-3, -0.1),
    b=st.floats(0.1, 3),
    n=st.integers(3, 300),
    p=st.floats(-10, 10),
    q=st.floats(-10, 10),
)
def test_trapezoid_exact_for_affine(a, b, n, p, q):
    g = build_grid(Interval(a, b), n)
    exact = p * (b * b - a * a) / 2 + q * (b - a)
    got = integrate(g, p * g.nodes + q)
    assert abs(got - exact) <= 1e-12 * max(1.0, abs(p) * (b * b + a * a) + abs(q) * (b - a))


def test_trapezoid_refinement_order():
    errs = []
    for n in (101, 201, 401):
        g = build_grid(Interval(-1, 2), n)
        errs.append(abs(integrate(g, np.exp(g.nodes)) - (math.e**2 - math.exp(-1))))
    orders = [math.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    assert all(1.8 <= o <= 2.2 for o in orders)


def test_uniform_kernel_samples():
    g = build_grid(Interval(-1, 1), 101)
    np.testing.assert_allclose(eval_kernel(MutationKernel("uniform"), g), 0.5, rtol=1e-14)


def test_raw_gaussian_kernel_peak():
    g = build_grid(Interval(-1.5, 1.5), 1501)
    raw = eval_kernel(MutationKernel("gaussian", sigma2=10.0, normalize=False), g)
    assert raw[g.zero_index] == pytest.approx(1 / (40 * math.pi), rel=1e-14)
    assert raw[g.zero_index] == pytest.approx(7.9577e-3, rel=1e-4)


def test_normalized_gaussian_kernel_scaling():
    interval = Interval(-1.5, 1.5)
    g = build_grid(interval, 1501)
    raw = eval_kernel(MutationKernel("gaussian", sigma2=10.0, normalize=False), g)
    norm = eval_kernel(MutationKernel("gaussian", sigma2=10.0), g)
    # oracle: very fine trapezoid of the raw kernel
    fine = build_grid(interval, 200001)
    mass = integrate(fine, np.exp(-fine.nodes**2 / 20) / (40 * math.pi))
    assert mass == pytest.approx(0.02301, abs=1e-5)
    assert raw_kernel_mass(MutationKernel("gaussian", sigma2=10.0), interval) == pytest.approx(mass, rel=1e-10)
    np.testing.assert_allclose(norm, raw / mass, rtol=1e-6)
    assert integrate(g, norm) == pytest.approx(1.0, abs=1e-12)


def test_tabulated_kernel():
    k = MutationKernel("tabulated", table=((-1, 1.0), (0, 3.0), (1, 1.0)))
    interval = Interval(-1, 1)
    assert raw_kernel_mass(k, interval) == pytest.approx(4.0)
    g = build_grid(interval, 201)
    vals = eval_kernel(k, g)
    assert integrate(g, vals) == pytest.approx(1.0, abs=1e-12)
    assert kernel_at_zero(k, interval, g) == pytest.approx(vals[g.zero_index])


def test_tabulated_kernel_rejects_nonpositive():
    with pytest.raises(InvalidArgument):
        MutationKernel("tabulated", table=((-1, 1.0), (1, 0.0)))
    with pytest.raises(InvalidArgument):
        MutationKernel("tabulated", table=((1, 1.0), (-1, 1.0)))


@settings(max_examples=40)
@given(sigma2=st.floats(0.05, 50), a=st.floats(-3, -0.2), b=st.floats(0.2, 3))
def test_kernel_positive_with_unit_mass(sigma2, a, b):
    g = build_grid(Interval(a, b), 301)
    vals = eval_kernel(MutationKernel("gaussian", sigma2=sigma2), g)
    assert np.all(vals > 0)
    assert abs(integrate(g, vals) - 1.0) <= 1e-10


def test_model_params_epsilon_range():
    with pytest.raises(InvalidArgument):
        ModelParams(-0.1, Interval(-1, 1))
    with pytest.raises(InvalidArgument):
        ModelParams(1.0, Interval(-1, 1))


def test_population_state_mass_and_sign():
    g = build_grid(Interval(-1, 1), 11)
    s = PopulationState.from_values(g, 0.0, np.full(11, 0.25))
    assert s.mass == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(InvalidArgument):
        PopulationState.from_values(g, 0.0, np.full(11, -1.0))
    with pytest.raises(InvalidArgument):
        PopulationState.from_values(g, 0.0, np.ones(10))


def test_resolution_guard():
    params = ModelParams(1e-3, Interval(-1.5, 1.5), MutationKernel("gaussian", sigma2=10.0))
    assert not resolution_ok(make_model(params, 1501))
    assert resolution_ok(make_model(params, 12001))
