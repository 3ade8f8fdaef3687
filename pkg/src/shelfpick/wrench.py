"""Disturbance wrenches and worst-case grasp quality.

A planar wrench is a ``(w_y, w_z, w_tau)`` float array. Forces are expressed
in units of twice the item weight, so gravity with a 50% mass margin is the
bias ``(0, -0.5)`` and the disturbance force ball has unit radius. Torques
use whatever length unit the contact coordinates carry; the grasp planner
passes contacts recentered on the item box center and scaled by its
half-width, which makes the default torque bound item-independent.

Quality of a grasp against one wrench is the minimum weighted squared
contact force that balances it; quality of a grasp overall is the maximum
over the disturbance set, infinite when any sampled wrench cannot be
balanced (grasp rejected).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ContactPair, cross2
from .qp import QpProblem, QpStatus, solve_qp

BALANCE_TOL = 1e-9


class SolverFailure(RuntimeError):
    """Underlying QP solve did not converge."""


@dataclass
class DisturbanceSet:
    """Force ball plus torque interval: the wrenches a grasp must reject.

    ``{ (bias + f, tau) : |f| <= radius, tau_min <= tau <= tau_max }``
    """

    bias: np.ndarray
    radius: float
    tau_min: float
    tau_max: float

    def __post_init__(self):
        self.bias = np.asarray(self.bias, dtype=float).reshape(2)
        self.radius = float(self.radius)
        self.tau_min = float(self.tau_min)
        self.tau_max = float(self.tau_max)
        if self.radius < 0.0:
            raise ValueError("radius must be nonnegative")
        if self.tau_min > self.tau_max:
            raise ValueError("tau_min must not exceed tau_max")

    @classmethod
    def default(cls) -> "DisturbanceSet":
        return cls(bias=np.array([0.0, -0.5]), radius=1.0, tau_min=-0.1, tau_max=0.1)

    @property
    def contains_origin_interior(self) -> bool:
        return bool(np.linalg.norm(self.bias) < self.radius and self.tau_min < 0.0 < self.tau_max)

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float).reshape(3)
        return bool(
            np.linalg.norm(w[:2] - self.bias) <= self.radius + tol
            and self.tau_min - tol <= w[2] <= self.tau_max + tol
        )


@dataclass
class ContactForce:
    """Contact-frame force: normal component plus in-plane tangential one."""

    normal: float
    tangential: float


@dataclass
class GraspParams:
    """Contact model parameters.

    weight: 2x2 positive definite cost on each contact force.
    mu: Coulomb friction coefficient.
    n_max: upper normal-force bound (the lower bound is fixed at 1).
    sample_density: disturbance boundary samples per unit arc length, per
    torque endpoint; the default puts 32 angular samples on a unit circle.
    """

    weight: np.ndarray = field(default_factory=lambda: np.eye(2))
    mu: float = 0.5
    n_max: float = 10.0
    sample_density: float = 32.0 / (2.0 * math.pi)

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float).reshape(2, 2)
        eigs = np.linalg.eigvalsh(0.5 * (self.weight + self.weight.T))
        if eigs[0] <= 0.0:
            raise ValueError("weight must be positive definite")
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        if self.n_max < 1.0:
            raise ValueError("n_max must be at least the unit lower bound")
        if self.sample_density <= 0.0:
            raise ValueError("sample_density must be positive")


def tangent_direction(normal) -> np.ndarray:
    """In-plane unit tangent of a contact: perpendicular to the normal,
    oriented upward (positive z) where possible."""
    n = np.asarray(normal, dtype=float).reshape(2)
    n = n / np.linalg.norm(n)
    t = np.array([-n[1], n[0]])
    if t[1] < 0.0 or (t[1] == 0.0 and t[0] < 0.0):
        # flip, except in the exactly-vertical-normal tie where the +90 degree
        # rotation is kept
        if abs(t[1]) > 1e-15:
            t = -t
    return t


def _angular_count(density: float, radius: float) -> int:
    if radius <= 0.0:
        return 1
    return max(1, int(math.ceil(density * 2.0 * math.pi * radius - 1e-9)))


def disturbance_boundary_samples(dset: DisturbanceSet, density: float) -> np.ndarray:
    """Wrenches on the force-ball boundary at the torque extremes.

    The worst-case wrench lives there, so sampling this set suffices for the
    quality maximum. Returns an (N, 3) array; angular arc spacing is at most
    1/density. A zero-radius ball collapses to the bias point; equal torque
    bounds collapse to a single circle.
    """
    count = _angular_count(density, dset.radius)
    angles = np.arange(count) * (2.0 * math.pi / count)
    circle = dset.bias[None, :] + dset.radius * np.stack(
        [np.cos(angles), np.sin(angles)], axis=1
    )
    taus = [dset.tau_min] if dset.tau_min == dset.tau_max else [dset.tau_min, dset.tau_max]
    chunks = [
        np.hstack([circle, np.full((count, 1), tau)])
        for tau in taus
    ]
    return np.vstack(chunks)


@dataclass
class _ChordModel:
    """Per-pair precomputation shared by every wrench evaluation."""

    balance: np.ndarray       # (3, 4) force/torque balance rows
    balance_pinv: np.ndarray  # (4, 3)
    null: np.ndarray          # (4,) remaining force degree of freedom
    cost: np.ndarray          # (4, 4) block-diagonal weight
    C: np.ndarray             # (8, 4) friction and normal bounds
    d: np.ndarray             # (8,)


def _build_model(pair: ContactPair, params: GraspParams) -> _ChordModel:
    t_l = tangent_direction(pair.n_l)
    t_r = tangent_direction(pair.n_r)
    cols = np.column_stack([pair.n_l, t_l, pair.n_r, t_r])  # item-frame force per unit variable
    levers = np.column_stack([pair.c_l, pair.c_l, pair.c_r, pair.c_r])
    torque_row = levers[0] * cols[1] - levers[1] * cols[0]
    balance = np.vstack([cols, torque_row])

    u, sv, vt = np.linalg.svd(balance)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ValueError("degenerate contact pair: balance rows are rank deficient")
    pinv = vt[: sv.size].T @ np.diag(1.0 / sv) @ u.T
    null = vt[-1]

    mu, n_max = params.mu, params.n_max
    C = np.array(
        [
            [-mu, 1.0, 0.0, 0.0],
            [-mu, -1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -mu, 1.0],
            [0.0, 0.0, -mu, -1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    d = np.array([0.0, 0.0, -1.0, n_max, 0.0, 0.0, -1.0, n_max])
    cost = np.zeros((4, 4))
    cost[:2, :2] = params.weight
    cost[2:, 2:] = params.weight
    return _ChordModel(balance, pinv, null, cost, C, d)


def quality_over_wrenches(
    pair: ContactPair, wrenches: np.ndarray, params: GraspParams
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-wrench quality: (objectives, feasible mask).

    The three balance rows leave one force degree of freedom, so each wrench
    reduces to a scalar quadratic over an interval. Infeasible wrenches get
    objective +inf. Results are independent of wrench order.
    """
    model = _build_model(pair, params)
    W = np.asarray(wrenches, dtype=float).reshape(-1, 3)
    xp = model.balance_pinv @ (-W.T)  # (4, N) minimum-norm balancing forces
    v = model.null
    Bv = model.cost @ v
    a2 = float(v @ Bv)
    a1 = 2.0 * (xp.T @ Bv)
    a0 = np.einsum("ij,ij->j", xp, model.cost @ xp)

    cv = model.C @ v
    slack = model.d[:, None] - model.C @ xp  # (8, N)
    pos = cv > 1e-12
    neg = cv < -1e-12
    fixed = ~(pos | neg)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = slack / cv[:, None]
    hi = np.min(np.where(pos[:, None], ratios, np.inf), axis=0)
    lo = np.max(np.where(neg[:, None], ratios, -np.inf), axis=0)
    feasible = lo <= hi + BALANCE_TOL
    if np.any(fixed):
        feasible &= np.all(slack[fixed] >= -BALANCE_TOL, axis=0)

    s = np.clip(-a1 / (2.0 * a2), lo, hi)
    objectives = np.where(feasible, a2 * s * s + a1 * s + a0, np.inf)
    return objectives, feasible


def contact_force_qp(pair: ContactPair, w, params: GraspParams):
    """Minimum-cost contact forces balancing one wrench.

    Returns (forces, objective) with contact-frame ContactForce entries, or
    None when the wrench cannot be balanced within the friction and normal
    bounds. Raises SolverFailure if the QP iteration fails to converge.
    """
    model = _build_model(pair, params)
    w = np.asarray(w, dtype=float).reshape(3)
    H = 2.0 * model.cost
    problem = QpProblem(H=H, g=np.zeros(4), A=model.balance, b=-w, C=model.C, d=model.d)
    sol = solve_qp(problem)
    if sol.status is QpStatus.INFEASIBLE:
        return None
    if sol.status is not QpStatus.OPTIMAL:
        raise SolverFailure(f"contact force QP ended with {sol.status.value}")
    x = sol.x
    forces = (ContactForce(float(x[0]), float(x[1])), ContactForce(float(x[2]), float(x[3])))
    return forces, float(sol.objective)


def grasp_quality(pair: ContactPair, dset: DisturbanceSet, params: GraspParams) -> float:
    """Worst-case quality over the disturbance set (boundary sampling).

    Infinite when any sampled wrench is rejected, meaning the grasp cannot
    hold the item against the modeled disturbances.
    """
    samples = disturbance_boundary_samples(dset, params.sample_density)
    objectives, feasible = quality_over_wrenches(pair, samples, params)
    if not bool(np.all(feasible)):
        return math.inf
    return float(np.max(objectives))


@dataclass
class BruteForceGrid:
    """Dense grid resolution over the full disturbance set."""

    n_radial: int = 20
    n_angular: int = 64
    n_tau: int = 11

    def __post_init__(self):
        if min(self.n_radial, self.n_angular, self.n_tau) < 2:
            raise ValueError("grid counts must be at least 2 in every dimension")


def brute_force_quality(
    pair: ContactPair, dset: DisturbanceSet, grid: BruteForceGrid, params: GraspParams
) -> float:
    """Reference quality: maximum over a dense grid of the full set.

    Exists to cross-check the boundary-sampling shortcut. The grid covers
    interior radii and torques; its angular rays are drawn from the boundary
    sampler's angle lattice (a near-uniform subset when the lattice is finer
    than ``grid.n_angular``, the whole lattice otherwise) so every grid ring
    point is also a boundary sample. Force interpolation along rays and
    torque interpolation between the endpoints then guarantee the boundary
    maximum dominates the grid maximum up to arithmetic noise.
    """
    lattice = _angular_count(params.sample_density, dset.radius)
    if lattice >= grid.n_angular:
        idx = np.round(np.arange(grid.n_angular) * lattice / grid.n_angular).astype(int)
    else:
        idx = np.arange(lattice)
    radii = np.linspace(0.0, dset.radius, grid.n_radial)
    angles = idx * (2.0 * math.pi / lattice)
    taus = np.linspace(dset.tau_min, dset.tau_max, grid.n_tau)
    ca, sa = np.cos(angles), np.sin(angles)
    fy = dset.bias[0] + np.outer(radii, ca).ravel()
    fz = dset.bias[1] + np.outer(radii, sa).ravel()
    pts = np.column_stack([fy, fz])
    pts = np.unique(pts, axis=0)  # radius 0 collapses duplicate rays
    wrenches = np.hstack(
        [
            np.repeat(pts, taus.shape[0], axis=0),
            np.tile(taus, pts.shape[0])[:, None],
        ]
    )
    objectives, feasible = quality_over_wrenches(pair, wrenches, params)
    if not bool(np.all(feasible)):
        return math.inf
    return float(np.max(objectives))
