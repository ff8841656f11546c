"""Regular points, splittings, the Newton solver, and charts."""

import numpy as np
import pytest

from tamef.errors import (NonConvergenceError, RegularityError,
                          SingularBlockError, UnsupportedGradingError)
from tamef.graded import BanachFiber, SequenceSpace, seminorm_l1
from tamef.implicit import (Chart, ConstraintMap, PointSplit, SplitConstraint,
                            affine_constraint, apply_dphi, apply_vphi,
                            build_chart, build_constraint, check_jacobian,
                            finite_difference_jacobian, find_preimage,
                            flatten, is_regular_point, is_regular_value,
                            jacobian_matrix, level_weights,
                            linear_constraint, polynomial_constraint,
                            solve_implicit, sphere_constraint,
                            sphere_intersection_constraint, split_at,
                            unflatten)
from tamef.probes import make_probes

R1 = BanachFiber(1)
SPACE16 = SequenceSpace(R1, truncation_degree=16, n_max=4)
SPACE8 = SequenceSpace(R1, truncation_degree=8, n_max=4)

# Newton on y^2 - 1 from 0.5: y <- (y + 1/y)/2
QUADRATIC_ITERATES = (0.5, 1.25, 1.025, 1.0003048780487805)


def scalar_quadratic():
    """phi(y) = y^2 - 1 with no kernel coordinates."""
    return SplitConstraint(
        lambda x, y: np.array([y[0] * y[0] - 1.0]),
        x_dim=0, y_dim=1,
        d_y=lambda x, y: np.array([[2.0 * y[0]]]),
        name="quadratic")


def unit_vector(space, index, scale=1.0):
    return space.basis(index, scale=scale)


# ---------------------------------------------------------------------------
# flat coordinates
# ---------------------------------------------------------------------------

def test_flatten_round_trip():
    f = SPACE16.basis(3, scale=2.5) + SPACE16.basis(0, scale=-1.0)
    back = unflatten(SPACE16, flatten(f))
    assert np.array_equal(back.coefficients, f.coefficients)


def test_level_weights_match_seminorm():
    f = SPACE16.basis(5, scale=3.0)
    w = level_weights(SPACE16, 2)
    assert float(np.sum(w * np.abs(flatten(f)))) == seminorm_l1(f, 2)


# ---------------------------------------------------------------------------
# Newton solver oracles
# ---------------------------------------------------------------------------

def test_newton_iterates_on_scalar_quadratic():
    result = solve_implicit(scalar_quadratic(), np.zeros(0), [0.5])
    assert result.converged
    assert len(result.iterates) >= len(QUADRATIC_ITERATES)
    for got, want in zip(result.iterates, QUADRATIC_ITERATES):
        assert got[0] == pytest.approx(want, abs=1e-12)
    assert result.y[0] == pytest.approx(1.0, abs=1e-12)


def test_newton_residuals_decrease_and_contract_quadratically():
    result = solve_implicit(scalar_quadratic(), np.zeros(0), [0.5])
    res = result.residuals
    assert all(res[i + 1] < res[i] for i in range(len(res) - 1))
    for i in range(len(res) - 1):
        if res[i] < 0.1:
            assert res[i + 1] <= 2.0 * res[i] ** 2


def test_newton_converges_in_one_step_for_affine():
    split = SplitConstraint(
        lambda x, y: y - np.array([2.0 * x[0] + 1.0, -x[1]]),
        x_dim=2, y_dim=2,
        d_x=lambda x, y: np.array([[-2.0, 0.0], [0.0, 1.0]]),
        d_y=lambda x, y: np.eye(2),
        name="affine-split")
    result = solve_implicit(split, [1.0, 3.0], [0.0, 0.0])
    assert result.converged
    assert result.iterations == 1
    assert result.y == pytest.approx([3.0, -3.0], abs=1e-14)


def test_newton_with_target_value():
    split = scalar_quadratic()
    result = solve_implicit(split, np.zeros(0), [2.0], target=[3.0])
    # y^2 - 1 = 3 -> y = 2 from the start
    assert result.iterations == 0
    assert result.y[0] == 2.0


def test_newton_nonconvergence_carries_history():
    with pytest.raises(NonConvergenceError) as err:
        solve_implicit(scalar_quadratic(), np.zeros(0), [0.5],
                       tol=1e-13, max_iter=3)
    assert len(err.value.history) == 4
    assert err.value.history[0] == pytest.approx(0.75)


def test_newton_no_real_root_stalls():
    split = SplitConstraint(
        lambda x, y: np.array([y[0] * y[0] + 1.0]),
        x_dim=0, y_dim=1,
        d_y=lambda x, y: np.array([[2.0 * y[0]]]),
        name="no-root")
    with pytest.raises((NonConvergenceError, SingularBlockError)):
        solve_implicit(split, np.zeros(0), [1.0])


# ---------------------------------------------------------------------------
# differential and its inverse in split coordinates
# ---------------------------------------------------------------------------

def test_dphi_for_affine_graph():
    # phi(x, y) = y - a(x), tangent (h1, h2) -> (h1, h2 - a(h1))
    A = np.array([[1.0, 2.0], [0.0, -1.0]])
    split = SplitConstraint(
        lambda x, y: y - A @ x, x_dim=2, y_dim=2,
        d_x=lambda x, y: -A, d_y=lambda x, y: np.eye(2),
        name="graph")
    h1 = np.array([1.0, 1.0])
    h2 = np.array([0.5, 0.5])
    out1, out2 = apply_dphi(split, [0.0, 0.0], [0.0, 0.0], h1, h2)
    assert np.array_equal(out1, h1)
    assert out2 == pytest.approx(h2 - A @ h1, abs=1e-14)


def test_vphi_halves_for_doubling_block():
    # phi(x, y) = 2y: the inverse differential maps (k1, k2) to (k1, k2/2)
    split = SplitConstraint(
        lambda x, y: 2.0 * y, x_dim=1, y_dim=1,
        d_x=lambda x, y: np.zeros((1, 1)),
        d_y=lambda x, y: 2.0 * np.eye(1),
        name="doubling")
    out1, out2 = apply_vphi(split, [0.3], [0.7], [4.0], [10.0])
    assert out1 == pytest.approx([4.0])
    assert out2 == pytest.approx([5.0], abs=1e-15)


def test_vphi_rejects_singular_block():
    split = SplitConstraint(
        lambda x, y: 0.0 * y, x_dim=1, y_dim=1,
        d_y=lambda x, y: np.zeros((1, 1)),
        name="degenerate")
    with pytest.raises(SingularBlockError):
        apply_vphi(split, [0.0], [0.0], [1.0], [1.0])


def test_finite_difference_blocks_match_supplied():
    A = np.array([[1.0, -3.0]])
    supplied = SplitConstraint(
        lambda x, y: np.array([y[0] ** 2]) + A @ x, x_dim=2, y_dim=1,
        d_x=lambda x, y: A, d_y=lambda x, y: np.array([[2.0 * y[0]]]),
        name="mixed")
    fd = SplitConstraint(supplied.phi_xy, x_dim=2, y_dim=1, name="mixed-fd")
    x, y = np.array([0.4, -0.2]), np.array([1.3])
    assert fd.d_x(x, y) == pytest.approx(supplied.d_x(x, y), abs=1e-6)
    assert fd.d_y(x, y) == pytest.approx(supplied.d_y(x, y), abs=1e-6)


# ---------------------------------------------------------------------------
# regular points of ambient constraints
# ---------------------------------------------------------------------------

def test_sphere_regular_at_first_basis_vector():
    c = sphere_constraint(SPACE16)
    report = is_regular_point(c, SPACE16.basis(0))
    assert report.rank_decision
    assert report.singular_values == pytest.approx((2.0,), abs=1e-14)
    assert len(report.kernel_basis) == SPACE16.flat_dimension - 1
    assert len(report.complement_basis) == 1
    # complement aligns with the gradient direction, canonical sign positive
    compl = flatten(report.complement_basis[0])
    assert compl[0] == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(compl[1:]) <= 1e-12


def test_sphere_not_regular_at_origin():
    c = sphere_constraint(SPACE16)
    report = is_regular_point(c, SPACE16.zero())
    assert not report.rank_decision
    assert report.singular_values == (0.0,)
    assert report.kernel_basis is None


def test_kernel_basis_is_orthonormal_and_annihilated():
    c = sphere_constraint(SPACE16, level=1)
    p = SPACE16.basis(0, scale=0.8) + SPACE16.basis(2, scale=0.1)
    report = is_regular_point(c, p)
    assert report.rank_decision
    w2 = level_weights(SPACE16, 1) ** 2
    vectors = [flatten(v) for v in report.kernel_basis]
    for i, u in enumerate(vectors):
        for j, v in enumerate(vectors):
            want = 1.0 if i == j else 0.0
            assert float(np.sum(w2 * u * v)) == pytest.approx(want, abs=1e-10)
        assert np.linalg.norm(report.jacobian @ u) <= 1e-10
    compl = flatten(report.complement_basis[0])
    for u in vectors:
        assert float(np.sum(w2 * compl * u)) == pytest.approx(0.0, abs=1e-10)


def test_codimension_larger_than_space_rejected():
    tiny = SequenceSpace(R1, truncation_degree=1, n_max=1)
    c = affine_constraint(tiny, np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        is_regular_point(c, tiny.zero())


def test_supplied_jacobian_matches_finite_differences():
    c = sphere_constraint(SPACE8, level=1)
    probes = make_probes(SPACE8, 10, seed=5)
    assert check_jacobian(c, probes) <= 1e-6


# ---------------------------------------------------------------------------
# splitting at a regular point
# ---------------------------------------------------------------------------

def test_split_coordinates_round_trip():
    c = sphere_constraint(SPACE16)
    ps = split_at(c, SPACE16.basis(0))
    q = SPACE16.basis(0, scale=0.3) + SPACE16.basis(4, scale=-1.2)
    x, y = ps.coords_of(q)
    back = ps.point_of(x, y)
    assert np.allclose(back.coefficients, q.coefficients, atol=1e-12)


def test_split_sphere_solves_to_oracle_point():
    # kernel offset 0.6 on the unit sphere forces the complement
    # coordinate to sqrt(1 - 0.36) = 0.8
    c = sphere_constraint(SPACE16)
    ps = split_at(c, SPACE16.basis(0))
    x = np.zeros(ps.split.x_dim)
    x[0] = 0.6
    result = solve_implicit(ps.split, x, [0.5])
    assert result.converged
    assert result.y[0] == pytest.approx(0.8, abs=1e-12)
    point = ps.point_of(x, result.y)
    assert c.value(point)[0] == pytest.approx(0.0, abs=1e-11)


def test_split_sphere_residuals_contract_quadratically():
    c = sphere_constraint(SPACE16)
    ps = split_at(c, SPACE16.basis(0))
    x = np.zeros(ps.split.x_dim)
    x[0] = 0.6
    res = solve_implicit(ps.split, x, [0.5]).residuals
    for i in range(len(res) - 1):
        if res[i] < 0.1:
            assert res[i + 1] <= 2.0 * res[i] ** 2


def test_split_sphere_dphi_doubles_along_gradient():
    # at the base point the complement coordinate is 1; d/dy <q,q> = 2y
    c = sphere_constraint(SPACE16)
    ps = split_at(c, SPACE16.basis(0))
    x, y = ps.coords_of(SPACE16.basis(0))
    assert np.linalg.norm(x) <= 1e-12
    assert y == pytest.approx([1.0], abs=1e-12)
    h1 = np.zeros(ps.split.x_dim)
    out1, out2 = apply_dphi(ps.split, x, y, h1, [1.0])
    assert np.array_equal(out1, h1)
    assert out2 == pytest.approx([2.0], abs=1e-12)


def test_dphi_vphi_identity_on_random_cotangents():
    c = sphere_constraint(SPACE16)
    ps = split_at(c, SPACE16.basis(0))
    raw = SPACE16.basis(0) + SPACE16.basis(1, scale=0.3) \
        + SPACE16.basis(2, scale=0.1)
    q = raw * (1.0 / seminorm_l1(raw, 0) ** 0.5)  # not unit; still regular
    x, y = ps.coords_of(q)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(7)))
    for _ in range(64):
        k1 = rng.normal(size=ps.split.x_dim)
        k2 = rng.normal(size=1)
        v1, v2 = apply_vphi(ps.split, x, y, k1, k2)
        d1, d2 = apply_dphi(ps.split, x, y, v1, v2)
        scale = 1.0 + float(np.linalg.norm(k1)) + float(np.linalg.norm(k2))
        assert float(np.linalg.norm(d1 - k1)) <= 1e-9 * scale
        assert float(np.linalg.norm(d2 - k2)) <= 1e-9 * scale


def test_split_rejects_non_regular_report():
    c = sphere_constraint(SPACE16)
    report = is_regular_point(c, SPACE16.zero())
    with pytest.raises(RegularityError):
        PointSplit(c, report)


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

def test_sphere_chart_round_trip():
    c = sphere_constraint(SPACE16)
    chart = build_chart(c, SPACE16.basis(0), seed=11)
    x = np.zeros(SPACE16.flat_dimension - 1)
    x[0], x[2] = 0.3, -0.2
    q = chart.inverse(x)
    assert c.value(q)[0] == pytest.approx(0.0, abs=1e-10)
    x_back, values = chart.forward(q)
    assert x_back == pytest.approx(x, abs=1e-10)
    assert np.linalg.norm(values) <= 1e-10


def test_sphere_chart_radius_reaches_the_equator():
    # the complement coordinate hits zero when the kernel offsets reach
    # norm 1, so the certified radius lands just around 1
    c = sphere_constraint(SPACE16)
    chart = build_chart(c, SPACE16.basis(0), seed=11)
    assert 0.9 <= chart.validity_radius <= 1.1


def test_chart_forward_of_base_point_is_origin():
    c = sphere_constraint(SPACE16)
    chart = build_chart(c, SPACE16.basis(0), seed=11)
    x, values = chart.forward(chart.base_point)
    assert np.linalg.norm(x) <= 1e-12
    assert np.linalg.norm(values) <= 1e-12


def test_chart_determinism():
    c = sphere_constraint(SPACE16)
    r1 = build_chart(c, SPACE16.basis(0), seed=11).validity_radius
    r2 = build_chart(c, SPACE16.basis(0), seed=11).validity_radius
    assert r1 == r2


def test_linear_chart_is_global():
    c = linear_constraint(SPACE8, [1.0])
    p = SPACE8.basis(0)  # phi(p) = 1, regular everywhere
    chart = build_chart(c, p, seed=3)
    assert chart.validity_radius >= 256.0
    x = np.zeros(SPACE8.flat_dimension - 1)
    x[1] = 100.0
    q = chart.inverse(x, values=np.array([1.0]))
    x_back, values = chart.forward(q)
    assert x_back == pytest.approx(x, abs=1e-9)
    assert values == pytest.approx([1.0], abs=1e-12)


def test_chart_rejects_singular_base_point():
    c = sphere_constraint(SPACE16)
    with pytest.raises(RegularityError):
        build_chart(c, SPACE16.zero(), seed=1)


def test_chart_contains_and_json():
    c = sphere_constraint(SPACE16)
    chart = build_chart(c, SPACE16.basis(0), seed=11)
    near = chart.inverse(0.1 * np.eye(SPACE16.flat_dimension - 1)[0])
    assert chart.contains(near)
    payload = chart.to_json()
    assert set(payload) == {"base_point", "bases", "radius"}
    assert payload["radius"] == chart.validity_radius
    assert len(payload["bases"]["kernel"]) == SPACE16.flat_dimension - 1


# ---------------------------------------------------------------------------
# regular values
# ---------------------------------------------------------------------------

def test_sphere_zero_is_regular_value():
    c = sphere_constraint(SPACE16)
    seeds = [SPACE16.basis(0, scale=0.7),
             SPACE16.basis(0) + SPACE16.basis(3, scale=0.4)]
    report = is_regular_value(c, [0.0], seeds)
    assert report.verdict is True
    assert report.converged_count == 2
    for q in report.points:
        assert abs(c.value(q)[0]) <= 1e-10


def test_sphere_minus_one_fiber_is_critical():
    # <q,q> = 0 only at the origin, where the gradient vanishes
    c = sphere_constraint(SPACE16)
    report = is_regular_value(c, [-1.0], [SPACE16.zero()])
    assert report.verdict is False
    assert len(report.points) == 1
    assert report.points[0].is_zero


def test_empty_evidence_gives_no_verdict():
    rows = [[[1.0, [0, 0]], [1.0, []]]]  # q0^2 + 1, never zero
    c = polynomial_constraint(SPACE8, rows)
    report = is_regular_value(c, [0.0], [SPACE8.basis(0)], max_iter=25)
    assert report.verdict is None
    assert report.converged_count == 0


def test_linear_constraint_every_value_regular():
    c = linear_constraint(SPACE8, [1.0, 2.0])
    report = is_regular_value(c, [5.0], [SPACE8.zero()])
    assert report.verdict is True
    assert c.value(report.points[0])[0] == pytest.approx(5.0, abs=1e-10)


def test_preimage_dedupes_repeated_finds():
    c = sphere_constraint(SPACE16)
    seeds = [SPACE16.basis(0, scale=s) for s in (0.5, 0.8, 1.3)]
    report = is_regular_value(c, [0.0], seeds)
    assert report.converged_count == 3
    assert len(report.points) == 1


# ---------------------------------------------------------------------------
# constraint registry
# ---------------------------------------------------------------------------

def test_registry_sphere_names_and_levels():
    c = build_constraint("sphere:1", SPACE16)
    assert c.name == "sphere:1"
    assert c.level == 1
    assert c.target_dim == 1
    p = SPACE16.basis(0)  # weight e^0 = 1 at degree 0 for every level
    assert c.value(p)[0] == pytest.approx(0.0, abs=1e-14)


def test_registry_sphere_intersection():
    c = build_constraint("spheres:0,1", SPACE16)
    assert c.target_dim == 2
    assert c.level == 1  # splitting metric follows the strongest level
    p = SPACE16.basis(0)
    assert c.value(p) == pytest.approx([0.0, 0.0], abs=1e-14)


def test_registry_rejects_decreasing_levels():
    with pytest.raises(ValueError):
        build_constraint("spheres:1,0", SPACE16)


def test_registry_linear_pads_coefficients():
    c = build_constraint("linear:1,2", SPACE8)
    f = SPACE8.basis(0, scale=3.0) + SPACE8.basis(1, scale=-1.0)
    assert c.value(f)[0] == pytest.approx(1.0, abs=1e-14)


def test_registry_affine_needs_params():
    with pytest.raises(ValueError):
        build_constraint("affine", SPACE8)
    c = build_constraint("affine", SPACE8, params={
        "matrix": [[1.0] + [0.0] * (SPACE8.flat_dimension - 1)],
        "offset": [-2.0]})
    assert c.value(SPACE8.basis(0, scale=2.0))[0] == pytest.approx(0.0)


def test_registry_polynomial_jacobian_is_analytic():
    rows = [[[1.0, [0, 0]], [-1.0, [1]]],       # q0^2 - q1
            [[2.0, [0, 1, 1]], [0.5, []]]]      # 2 q0 q1^2 + 0.5
    c = build_constraint("polynomial", SPACE8, params={"rows": rows})
    assert c.target_dim == 2
    probes = make_probes(SPACE8, 6, seed=21)
    assert check_jacobian(c, probes) <= 1e-6


def test_registry_unknown_name():
    with pytest.raises(ValueError):
        build_constraint("saddle:2", SPACE8)


def test_registry_sphere_needs_metric_fiber():
    sup_fiber = BanachFiber(2, norm_kind="supremum")
    space = SequenceSpace(sup_fiber, truncation_degree=4, n_max=2)
    with pytest.raises(UnsupportedGradingError):
        build_constraint("sphere:0", space)


def test_fd_jacobian_used_when_not_supplied():
    def phi(f):
        flat = flatten(f)
        return np.array([flat[0] ** 3 - flat[1]])

    c = ConstraintMap("cubic", SPACE8, 1, phi)
    assert c.jacobian_mode == "finite_difference"
    f = SPACE8.basis(0, scale=2.0)
    J = jacobian_matrix(c, f)
    assert J[0, 0] == pytest.approx(12.0, rel=1e-6)
    assert J[0, 1] == pytest.approx(-1.0, rel=1e-6)
    # FD path feeds the regular point test too
    assert is_regular_point(c, f).rank_decision
