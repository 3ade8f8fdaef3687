"""Shared fixtures and random-instance generators for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from shelfpick.geometry import ContactPair
from shelfpick.qp import QpProblem


def random_contact_pair(rng: np.random.Generator, mu: float, margin: float = 0.0):
    """Random planar antipodal pair in normalized item coordinates.

    Contacts sit near opposite vertical faces of a unit-half-width item with
    normals perturbed away from horizontal. With margin > 0, resampling
    continues until the pair clears Nguyen's cone boundary by that angle on
    the requested side (positive margin: closed; negative: open).
    """
    from oracles import cone_margin

    while True:
        z_l = rng.uniform(-0.9, 0.9)
        z_r = rng.uniform(-0.9, 0.9)
        tilt_l = rng.uniform(-0.6, 0.6)
        tilt_r = rng.uniform(-0.6, 0.6)
        c_l = np.array([-1.0, z_l])
        c_r = np.array([1.0, z_r])
        n_l = np.array([math.cos(tilt_l), math.sin(tilt_l)])
        n_r = np.array([-math.cos(tilt_r), math.sin(tilt_r)])
        m = cone_margin(c_l, n_l, c_r, n_r, mu)
        if margin == 0.0 or (margin > 0.0 and m >= margin) or (margin < 0.0 and m <= margin):
            return ContactPair(c_l, c_r, n_l, n_r)


def random_qp(rng: np.random.Generator, n: int | None = None, infeasible: bool = False):
    """Random small convex QP; optionally with contradictory inequalities."""
    if n is None:
        n = int(rng.integers(2, 7))
    M = rng.normal(size=(n, n))
    H = M @ M.T + 0.5 * np.eye(n)
    g = rng.normal(size=n)
    m_eq = int(rng.integers(0, max(1, n - 1)))
    A = rng.normal(size=(m_eq, n)) if m_eq else None
    b = rng.normal(size=m_eq) if m_eq else None
    m_ineq = int(rng.integers(2, 9))
    C = rng.normal(size=(m_ineq, n))
    x_feas = rng.normal(size=n)
    if A is not None:
        # shift b so the equalities pass through a known point
        b = A @ x_feas
    d = C @ x_feas + rng.uniform(0.1, 2.0, size=m_ineq)
    if infeasible:
        # append the negation of a satisfied row, pushed past its slack
        row = C[0]
        C = np.vstack([C, -row])
        d = np.concatenate([d, [-(d[0]) - rng.uniform(0.5, 2.0)]])
    return QpProblem(H=H, g=g, A=A, b=b, C=C, d=d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
