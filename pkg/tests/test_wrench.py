"""Disturbance sets, contact-force QP, and worst-case grasp quality."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shelfpick.geometry import ContactPair
from shelfpick.wrench import (
    BruteForceGrid,
    DisturbanceSet,
    GraspParams,
    brute_force_quality,
    contact_force_qp,
    disturbance_boundary_samples,
    grasp_quality,
    quality_over_wrenches,
    tangent_direction,
)

from conftest import random_contact_pair
from oracles import cone_margin, dense_grid_quality, force_closure, grid_wrenches, min_effort_objective

# unit-width item gripped at mid-height: the normalized pair every planner
# chord reduces to when the chord crosses the full width at the box center
CENTERED = ContactPair([-1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [-1.0, 0.0])
CENTERED_QUALITY = 6.975907630197296


def test_params_validation():
    with pytest.raises(ValueError):
        GraspParams(weight=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        GraspParams(mu=-0.1)
    with pytest.raises(ValueError):
        GraspParams(n_max=0.5)
    with pytest.raises(ValueError):
        GraspParams(sample_density=0.0)
    with pytest.raises(ValueError):
        DisturbanceSet(bias=[0.0, 0.0], radius=-1.0, tau_min=0.0, tau_max=0.0)
    with pytest.raises(ValueError):
        DisturbanceSet(bias=[0.0, 0.0], radius=1.0, tau_min=0.2, tau_max=-0.2)
    with pytest.raises(ValueError):
        BruteForceGrid(n_radial=1)


def test_default_disturbance_set():
    dset = DisturbanceSet.default()
    np.testing.assert_allclose(dset.bias, [0.0, -0.5])
    assert dset.radius == 1.0
    assert dset.tau_min == -0.1 and dset.tau_max == 0.1
    assert dset.contains_origin_interior
    assert dset.contains([0.0, 0.5, 0.1])
    assert not dset.contains([0.0, 0.6, 0.0])
    assert not dset.contains([0.0, 0.0, 0.2])
    off = DisturbanceSet(bias=[2.0, 0.0], radius=1.0, tau_min=-0.1, tau_max=0.1)
    assert not off.contains_origin_interior


def test_tangent_direction_conventions():
    np.testing.assert_allclose(tangent_direction([1.0, 0.0]), [0.0, 1.0])
    np.testing.assert_allclose(tangent_direction([-1.0, 0.0]), [0.0, 1.0])
    # vertical normal keeps the +90 degree rotation
    np.testing.assert_allclose(tangent_direction([0.0, 1.0]), [-1.0, 0.0])
    np.testing.assert_allclose(tangent_direction([0.0, -1.0]), [1.0, 0.0])
    t = tangent_direction([3.0, 4.0])
    assert np.linalg.norm(t) == pytest.approx(1.0)
    assert abs(np.dot(t, [0.6, 0.8])) < 1e-12
    assert t[1] > 0.0


def test_boundary_samples_cover_extremes():
    dset = DisturbanceSet.default()
    samples = disturbance_boundary_samples(dset, 32.0 / (2.0 * math.pi))
    assert samples.shape == (64, 3)
    radii = np.linalg.norm(samples[:, :2] - dset.bias, axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-12)
    assert set(np.round(samples[:, 2], 12)) == {-0.1, 0.1}
    for w in samples:
        assert dset.contains(w)
    # arc spacing respects the density contract
    density = 5.0
    s2 = disturbance_boundary_samples(dset, density)
    count = s2.shape[0] // 2
    assert 2.0 * math.pi * dset.radius / count <= 1.0 / density + 1e-12


def test_boundary_samples_degenerate_sets():
    point = DisturbanceSet(bias=[0.3, -0.2], radius=0.0, tau_min=-0.1, tau_max=0.1)
    samples = disturbance_boundary_samples(point, 10.0)
    assert samples.shape == (2, 3)
    np.testing.assert_allclose(samples[:, :2], [[0.3, -0.2], [0.3, -0.2]])
    flat = DisturbanceSet(bias=[0.0, 0.0], radius=1.0, tau_min=0.05, tau_max=0.05)
    samples = disturbance_boundary_samples(flat, 8.0 / (2.0 * math.pi))
    assert samples.shape == (8, 3)
    assert np.all(samples[:, 2] == 0.05)


def test_contact_qp_frozen_values():
    params = GraspParams()
    forces, obj = contact_force_qp(CENTERED, np.zeros(3), params)
    # zero wrench: normals ride the unit lower bound, no tangential force
    assert obj == pytest.approx(2.0, abs=1e-9)
    for f in forces:
        assert f.normal == pytest.approx(1.0, abs=1e-9)
        assert f.tangential == pytest.approx(0.0, abs=1e-9)

    forces, obj = contact_force_qp(CENTERED, np.array([0.0, -0.5, 0.0]), params)
    # gravity bias: each tangential carries a quarter of the doubled weight
    assert obj == pytest.approx(2.125, abs=1e-9)
    for f in forces:
        assert f.normal == pytest.approx(1.0, abs=1e-9)
        assert abs(f.tangential) == pytest.approx(0.25, abs=1e-9)


def test_contact_qp_matches_oracle_on_frozen_wrenches():
    for w in [np.zeros(3), np.array([0.0, -0.5, 0.0]), np.array([0.3, 0.2, 0.1])]:
        ref = min_effort_objective(
            CENTERED.c_l, CENTERED.n_l, CENTERED.c_r, CENTERED.n_r, w, mu=0.5, n_max=10.0
        )
        _, obj = contact_force_qp(CENTERED, w, GraspParams())
        assert obj == pytest.approx(ref, abs=1e-8)


def test_contact_qp_rejects_unbalanceable_wrench():
    # max total tangential lift is 2 * mu * n_max = 10, below this demand
    assert contact_force_qp(CENTERED, np.array([0.0, -25.0, 0.0]), GraspParams()) is None
    assert min_effort_objective(
        CENTERED.c_l, CENTERED.n_l, CENTERED.c_r, CENTERED.n_r,
        np.array([0.0, -25.0, 0.0]), mu=0.5, n_max=10.0,
    ) == math.inf


def test_centered_pair_quality_all_routes_agree():
    params = GraspParams()
    dset = DisturbanceSet.default()
    q_boundary = grasp_quality(CENTERED, dset, params)
    assert q_boundary == pytest.approx(CENTERED_QUALITY, rel=1e-12)
    q_grid = brute_force_quality(CENTERED, dset, BruteForceGrid(), params)
    # grid rays include the boundary extremes, so the two routes agree here
    assert q_grid == pytest.approx(q_boundary, rel=1e-12)
    q_oracle = dense_grid_quality(
        CENTERED.c_l, CENTERED.n_l, CENTERED.c_r, CENTERED.n_r, mu=0.5, n_max=10.0
    )
    assert q_oracle == pytest.approx(q_boundary, rel=1e-9)


def test_quality_over_wrenches_matches_single_solves(rng):
    params = GraspParams()
    pair = random_contact_pair(rng, mu=0.5, margin=0.05)
    wrenches = disturbance_boundary_samples(DisturbanceSet.default(), 8.0 / (2.0 * math.pi))
    objectives, feasible = quality_over_wrenches(pair, wrenches, params)
    for w, obj, feas in zip(wrenches, objectives, feasible):
        out = contact_force_qp(pair, w, params)
        if out is None:
            assert not feas
        else:
            assert feas
            assert obj == pytest.approx(out[1], abs=1e-8)


def test_boundary_quality_bounds_dense_grid(rng):
    # boundary sampling at 64 angles makes its lattice coincide with the
    # oracle grid's 64 uniform rays, so domination must be exact up to fp
    params = GraspParams(sample_density=64.0 / (2.0 * math.pi))
    dset = DisturbanceSet.default()
    wrenches = grid_wrenches()
    checked = 0
    while checked < 8:
        pair = random_contact_pair(rng, mu=0.5, margin=0.05)
        q_boundary = grasp_quality(pair, dset, params)
        if not math.isfinite(q_boundary):
            continue
        q_oracle = dense_grid_quality(
            pair.c_l, pair.n_l, pair.c_r, pair.n_r, mu=0.5, n_max=10.0, wrenches=wrenches
        )
        assert math.isfinite(q_oracle)
        assert q_boundary >= q_oracle - 1e-7
        assert q_boundary <= q_oracle * 1.02
        checked += 1


def test_package_grid_never_exceeds_boundary(rng):
    # the packaged dense grid draws its rays from the boundary lattice, so
    # the boundary maximum dominates at any sampling density
    dset = DisturbanceSet.default()
    grid = BruteForceGrid()
    for density in [GraspParams().sample_density, 32.0]:
        params = GraspParams(sample_density=density)
        checked = 0
        while checked < 5:
            pair = random_contact_pair(rng, mu=0.5, margin=0.05)
            q_boundary = grasp_quality(pair, dset, params)
            if not math.isfinite(q_boundary):
                continue
            q_grid = brute_force_quality(pair, dset, grid, params)
            assert q_boundary >= q_grid - 1e-7
            assert abs(q_boundary - q_grid) <= 0.02 * q_grid
            checked += 1


def test_mirrored_pair_same_quality(rng):
    params = GraspParams()
    dset = DisturbanceSet.default()
    for _ in range(5):
        pair = random_contact_pair(rng, mu=0.5, margin=0.05)
        mirrored = ContactPair(
            [-pair.c_r[0], pair.c_r[1]],
            [-pair.c_l[0], pair.c_l[1]],
            [-pair.n_r[0], pair.n_r[1]],
            [-pair.n_l[0], pair.n_l[1]],
        )
        q = grasp_quality(pair, dset, params)
        q_m = grasp_quality(mirrored, dset, params)
        if math.isfinite(q):
            assert q_m == pytest.approx(q, rel=1e-9)
        else:
            assert not math.isfinite(q_m)


def test_slippery_grasp_rejected():
    # mu = 0.01 cannot produce the 0.5 tangential lift gravity demands
    q = grasp_quality(CENTERED, DisturbanceSet.default(), GraspParams(mu=0.01))
    assert q == math.inf


def test_finite_quality_iff_force_closure(rng):
    # away from the friction-cone boundary the two notions coincide
    params = GraspParams()
    dset = DisturbanceSet.default()
    for _ in range(10):
        pair = random_contact_pair(rng, mu=0.5, margin=0.02)
        assert force_closure(pair.c_l, pair.n_l, pair.c_r, pair.n_r, 0.5)
        assert math.isfinite(grasp_quality(pair, dset, params))
    for _ in range(10):
        pair = random_contact_pair(rng, mu=0.5, margin=-0.02)
        assert not force_closure(pair.c_l, pair.n_l, pair.c_r, pair.n_r, 0.5)
        assert grasp_quality(pair, dset, params) == math.inf


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**31 - 1))
def test_single_wrench_qp_agrees_with_oracle(seed):
    rng = np.random.default_rng(seed)
    pair = random_contact_pair(rng, mu=0.5)
    margin = cone_margin(pair.c_l, pair.n_l, pair.c_r, pair.n_r, 0.5)
    if abs(margin) < 1e-3:
        return  # skip the knife edge between feasible and not
    w = np.array([rng.uniform(-1, 1), rng.uniform(-1.5, 0.5), rng.uniform(-0.1, 0.1)])
    ref = min_effort_objective(
        pair.c_l, pair.n_l, pair.c_r, pair.n_r, w, mu=0.5, n_max=10.0
    )
    out = contact_force_qp(pair, w, GraspParams())
    if out is None:
        assert ref == math.inf
    else:
        assert ref < math.inf
        assert out[1] == pytest.approx(ref, abs=1e-7)
