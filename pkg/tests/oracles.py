"""Independent reference implementations used to cross-check package results.

Everything here is written from first principles with scipy/numpy building
blocks and deliberately avoids calling into shelfpick internals, so a bug in
the package cannot hide inside its own verification.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull

# ---------------------------------------------------------------------------
# polygons


def polygon_area(vertices: np.ndarray) -> float:
    """Unsigned shoelace area of a closed polygon (vertices not repeated)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def convex_hull_area(points: np.ndarray) -> float:
    return float(ConvexHull(np.asarray(points, dtype=float)).volume)


def _proper_crossing(p1, p2, p3, p4) -> bool:
    """True when open segments (p1,p2) and (p3,p4) cross at an interior point."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return (d1 * d2 < 0.0) and (d3 * d4 < 0.0)


def polygon_is_simple(vertices: np.ndarray) -> bool:
    """O(n^2) check that no two non-adjacent edges properly cross."""
    v = np.asarray(vertices, dtype=float)
    n = v.shape[0]
    edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == (i + 1) % n or (j + 1) % n == i:
                continue
            if _proper_crossing(*edges[i], *edges[j]):
                return False
    return True


def point_segment_distance(point, a, b) -> float:
    p = np.asarray(point, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def point_in_polygon(point, vertices, tol: float = 0.0) -> bool:
    """Ray casting with a boundary tolerance band counted as inside."""
    v = np.asarray(vertices, dtype=float)
    p = np.asarray(point, dtype=float)
    n = v.shape[0]
    if tol > 0.0:
        for i in range(n):
            if point_segment_distance(p, v[i], v[(i + 1) % n]) <= tol:
                return True
    inside = False
    j = n - 1
    for i in range(n):
        yi, yj = v[i, 1], v[j, 1]
        if (yi > p[1]) != (yj > p[1]):
            x_cross = v[i, 0] + (p[1] - yi) / (yj - yi) * (v[j, 0] - v[i, 0])
            if p[0] < x_cross:
                inside = not inside
        j = i
    return inside


# ---------------------------------------------------------------------------
# planar two-contact force closure (Nguyen's condition)


def cone_margin(c_l, n_l, c_r, n_r, mu: float) -> float:
    """Angular margin of Nguyen's condition.

    Positive: the line between the contacts lies strictly inside both
    friction cones and the grasp is force closed. The margin is the smallest
    angle to a cone boundary over both contacts.
    """
    c_l = np.asarray(c_l, dtype=float)
    c_r = np.asarray(c_r, dtype=float)
    chord = c_r - c_l
    norm = float(np.linalg.norm(chord))
    if norm < 1e-12:
        return -math.pi
    chord = chord / norm
    half_angle = math.atan(mu)

    def angle_to(u, v):
        return math.acos(float(np.clip(np.dot(u, v), -1.0, 1.0)))

    m_l = half_angle - angle_to(chord, np.asarray(n_l, dtype=float))
    m_r = half_angle - angle_to(-chord, np.asarray(n_r, dtype=float))
    return min(m_l, m_r)


def force_closure(c_l, n_l, c_r, n_r, mu: float) -> bool:
    return cone_margin(c_l, n_l, c_r, n_r, mu) > 0.0


# ---------------------------------------------------------------------------
# minimum-effort contact forces for one wrench, and a dense grid maximum
#
# Variables are x = [n_l, t_l, n_r, t_r] in the two contact frames. The three
# balance equations (force y, force z, torque) leave one degree of freedom,
# so the constrained minimum is found by enumerating the unconstrained
# minimizer together with every single-constraint boundary point; for a 1-D
# convex program over an interval the optimum is always among those.


def _frame_matrix(n_l, n_r, c_l, c_r):
    def tangent(n):
        t = np.array([-n[1], n[0]])
        if (t[1] < 0.0) and abs(t[1]) > 1e-15:
            t = -t
        return t

    n_l = np.asarray(n_l, dtype=float)
    n_r = np.asarray(n_r, dtype=float)
    c_l = np.asarray(c_l, dtype=float)
    c_r = np.asarray(c_r, dtype=float)
    t_l, t_r = tangent(n_l), tangent(n_r)
    force_cols = np.column_stack([n_l, t_l, n_r, t_r])
    levers = np.column_stack([c_l, c_l, c_r, c_r])
    torque = levers[0] * force_cols[1] - levers[1] * force_cols[0]
    return np.vstack([force_cols, torque])


def _friction_rows(mu: float, n_max: float):
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
    return C, d


def min_effort_objective(c_l, n_l, c_r, n_r, w, mu, n_max, Q=None) -> float:
    """Objective of the single-wrench contact force QP; inf when infeasible."""
    if Q is None:
        Q = np.eye(2)
    B = _frame_matrix(n_l, n_r, c_l, c_r)
    w = np.asarray(w, dtype=float).reshape(3)
    _, sv, vt = np.linalg.svd(B)
    if sv[-1] <= 1e-12 * sv[0]:
        return math.inf
    x_p, *_ = np.linalg.lstsq(B, -w, rcond=None)
    if float(np.max(np.abs(B @ x_p + w))) > 1e-8:
        return math.inf
    v = vt[-1]
    cost = np.zeros((4, 4))
    cost[:2, :2] = Q
    cost[2:, 2:] = Q
    C, d = _friction_rows(mu, n_max)

    a2 = float(v @ cost @ v)
    a1 = 2.0 * float(x_p @ cost @ v)
    cv = C @ v
    base = C @ x_p - d

    candidates = []
    if a2 > 0.0:
        candidates.append(-a1 / (2.0 * a2))
    for i in range(C.shape[0]):
        if abs(cv[i]) > 1e-12:
            candidates.append(-base[i] / cv[i])
    best = math.inf
    for s in candidates:
        if float(np.max(base + cv * s)) <= 1e-9:
            x = x_p + s * v
            best = min(best, float(x @ cost @ x))
    return best


def grid_wrenches(
    bias=(0.0, -0.5), radius=1.0, tau_min=-0.1, tau_max=0.1,
    n_radial=20, n_angular=64, n_tau=11,
) -> np.ndarray:
    """Dense (N, 3) grid over the full disturbance set, duplicates removed."""
    bias = np.asarray(bias, dtype=float)
    radii = np.linspace(0.0, radius, n_radial)
    angles = np.arange(n_angular) * (2.0 * math.pi / n_angular)
    taus = np.linspace(tau_min, tau_max, n_tau)
    fy = bias[0] + np.outer(radii, np.cos(angles)).ravel()
    fz = bias[1] + np.outer(radii, np.sin(angles)).ravel()
    pts = np.unique(np.column_stack([fy, fz]), axis=0)
    return np.column_stack(
        [
            np.repeat(pts, taus.shape[0], axis=0),
            np.tile(taus, pts.shape[0])[:, None],
        ]
    )


def dense_grid_quality(c_l, n_l, c_r, n_r, mu, n_max, wrenches=None, Q=None) -> float:
    """Worst single-wrench objective over a dense grid of the full set.

    Vectorized counterpart of min_effort_objective over all grid wrenches;
    the two agree, which test_wrench checks on a sample.
    """
    if wrenches is None:
        wrenches = grid_wrenches()
    if Q is None:
        Q = np.eye(2)
    B = _frame_matrix(n_l, n_r, c_l, c_r)
    u, sv, vt = np.linalg.svd(B)
    if sv[-1] <= 1e-12 * sv[0]:
        return math.inf
    pinv = vt[: sv.size].T @ np.diag(1.0 / sv) @ u.T
    v = vt[-1]
    cost = np.zeros((4, 4))
    cost[:2, :2] = Q
    cost[2:, 2:] = Q
    C, d = _friction_rows(mu, n_max)

    W = np.asarray(wrenches, dtype=float)
    XP = pinv @ (-W.T)  # (4, N)
    a2 = float(v @ cost @ v)
    a1 = 2.0 * (XP.T @ (cost @ v))  # (N,)
    cv = C @ v  # (8,)
    base = C @ XP - d[:, None]  # (8, N)

    # candidate scalars per wrench: unconstrained minimizer + 8 boundaries
    cands = [np.full(W.shape[0], np.nan)]
    if a2 > 0.0:
        cands[0] = -a1 / (2.0 * a2)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(C.shape[0]):
            cands.append(
                -base[i] / cv[i] if abs(cv[i]) > 1e-12
                else np.full(W.shape[0], np.nan)
            )
    S = np.vstack(cands)  # (K, N)
    feas = np.zeros(S.shape, dtype=bool)
    vals = np.full(S.shape, np.inf)
    for k in range(S.shape[0]):
        s = S[k]
        ok = np.isfinite(s)
        viol = np.max(base + np.outer(cv, np.where(ok, s, 0.0)), axis=0)
        feas[k] = ok & (viol <= 1e-9)
        quad = a2 * s * s + a1 * s + np.einsum("ij,ij->j", XP, cost @ XP)
        vals[k] = np.where(feas[k], quad, np.inf)
    per_wrench = np.min(vals, axis=0)
    if not bool(np.all(np.isfinite(per_wrench))):
        return math.inf
    return float(np.max(per_wrench))


# ---------------------------------------------------------------------------
# QP references


def lp_feasible(A, b, C, d) -> bool:
    """Phase-1 linear feasibility of {A x = b, C x <= d} via HiGHS."""
    A = np.asarray(A, dtype=float) if A is not None else np.zeros((0, 0))
    C = np.asarray(C, dtype=float) if C is not None else np.zeros((0, 0))
    n = A.shape[1] if A.size else (C.shape[1] if C.size else 0)
    if n == 0:
        return True
    res = linprog(
        c=np.zeros(n),
        A_ub=C if C.size else None,
        b_ub=np.asarray(d, dtype=float) if C.size else None,
        A_eq=A if A.size else None,
        b_eq=np.asarray(b, dtype=float) if A.size else None,
        bounds=[(None, None)] * n,
        method="highs",
    )
    return bool(res.status == 0)


def qp_reference(H, g, A=None, b=None, C=None, d=None, x0=None):
    """(feasible, objective, x) for min 0.5 x'Hx + g'x via SLSQP."""
    H = np.asarray(H, dtype=float)
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    if not lp_feasible(A, b, C, d):
        return False, math.inf, None

    constraints = []
    if A is not None and np.asarray(A).size:
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        constraints.append({"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A})
    if C is not None and np.asarray(C).size:
        C = np.asarray(C, dtype=float)
        d = np.asarray(d, dtype=float)
        constraints.append({"type": "ineq", "fun": lambda x: d - C @ x, "jac": lambda x: -C})
    if x0 is None:
        x0 = np.zeros(n)
        if A is not None and np.asarray(A).size:
            x0 = np.linalg.lstsq(A, b, rcond=None)[0]
    res = minimize(
        lambda x: 0.5 * x @ H @ x + g @ x,
        x0,
        jac=lambda x: H @ x + g,
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": 400, "ftol": 1e-14},
    )
    value = 0.5 * res.x @ H @ res.x + g @ res.x
    return True, float(value), res.x


# ---------------------------------------------------------------------------
# exhaustive-grid packing oracle
#
# Entities move along y only. Each entity dict needs:
#   key, hw (half width), z (z interval tuple), y0, weight, rest,
#   sign (-1 left-only / 0 free / +1 right-only), var (variable name),
#   off (offset from its variable's value; rigid slot coupling uses a shared
#   var with nonzero offsets).
# Pair constraints (ordered non-overlap) are generated between entities of
# different variables whose z intervals overlap; same-variable pairs move
# rigidly, mirroring the coupling exclusions of the packing program.


def _interval_overlap(a, b, tol: float = 1e-9) -> bool:
    return a[0] < b[1] - tol and b[0] < a[1] - tol


def pack_case_grid(entities, shelf_w, fixed: dict, step=0.001, tol=1e-9):
    """(feasible, cost) for one packing case on a regular grid.

    fixed maps variable names to frozen values. Free variables (at most two)
    scan a `step` lattice over their bounds, augmented with every
    constraint-critical coordinate so corner optima are hit exactly.
    """
    variables = sorted({e["var"] for e in entities})
    free = [v for v in variables if v not in fixed]
    if len(free) > 2:
        raise ValueError("grid oracle supports at most two free variables")

    # per-variable bounds from containment and movement-direction rows
    bounds = {v: [-math.inf, math.inf] for v in variables}
    for e in entities:
        lo = e["hw"] - e["off"]
        hi = shelf_w - e["hw"] - e["off"]
        if e["sign"] < 0:
            hi = min(hi, e["y0"] - e["off"])
        elif e["sign"] > 0:
            lo = max(lo, e["y0"] - e["off"])
        bounds[e["var"]][0] = max(bounds[e["var"]][0], lo)
        bounds[e["var"]][1] = min(bounds[e["var"]][1], hi)

    # ordered pair rows: pos_i + gap <= pos_j for y0-ordered overlapping pairs
    ordered = sorted(entities, key=lambda e: (e["y0"], e["key"]))
    pair_rows = []  # (var_i, off_i, var_j, off_j, gap)
    for i, ei in enumerate(ordered):
        for ej in ordered[i + 1:]:
            if ei["var"] == ej["var"]:
                continue
            if not _interval_overlap(ei["z"], ej["z"]):
                continue
            pair_rows.append((ei["var"], ei["off"], ej["var"], ej["off"], ei["hw"] + ej["hw"]))

    for v in variables:
        if bounds[v][0] > bounds[v][1] + tol:
            return False, math.inf
        # frozen variables must satisfy their own bound rows too
        if v in fixed and not (
            bounds[v][0] - tol <= fixed[v] <= bounds[v][1] + tol
        ):
            return False, math.inf

    def grid_for(var, extra=()):
        lo, hi = bounds[var]
        base = np.arange(lo, hi + step / 2.0, step)
        crit = [lo, hi]
        crit.extend(e["y0"] - e["off"] for e in entities if e["var"] == var)
        crit.extend(e["rest"] - e["off"] for e in entities if e["var"] == var)
        for vi, oi, vj, oj, gap in pair_rows:
            if vi == var and vj in fixed:
                crit.append(fixed[vj] + oj - gap - oi)
            if vj == var and vi in fixed:
                crit.append(fixed[vi] + oi + gap - oj)
        crit.extend(extra)
        crit = [c for c in crit if lo - 1e-12 <= c <= hi + 1e-12]
        return np.unique(np.concatenate([base, np.asarray(crit, dtype=float)]))

    def evaluate(values: dict):
        """Vectorized feasibility mask and cost over broadcast variable grids."""
        ok = None
        for vi, oi, vj, oj, gap in pair_rows:
            pos_i = values[vi] + oi if vi in values else fixed[vi] + oi
            pos_j = values[vj] + oj if vj in values else fixed[vj] + oj
            sat = pos_i + gap <= pos_j + tol
            ok = sat if ok is None else (ok & sat)
        cost = 0.0
        for e in entities:
            v = e["var"]
            pos = (values[v] if v in values else fixed[v]) + e["off"]
            cost = cost + e["weight"] * (pos - e["rest"]) ** 2
        return ok, cost

    if not free:
        ok, cost = evaluate({})
        feasible = bool(ok) if ok is not None else True
        return feasible, (float(cost) if feasible else math.inf)

    if len(free) == 1:
        v = free[0]
        grid = grid_for(v)
        ok, cost = evaluate({v: grid})
        if ok is None:
            ok = np.ones(grid.shape, dtype=bool)
        if not bool(np.any(ok)):
            return False, math.inf
        return True, float(np.min(np.where(ok, cost, np.inf)))

    va, vb = free
    grid_a = grid_for(va)
    # corners where a pair row ties vb to a critical va coordinate
    extra_b = []
    crit_a = [bounds[va][0], bounds[va][1]]
    crit_a.extend(e["y0"] - e["off"] for e in entities if e["var"] == va)
    for vi, oi, vj, oj, gap in pair_rows:
        for ca in crit_a:
            if vi == va and vj == vb:
                extra_b.append(ca + oi + gap - oj)
            if vj == va and vi == vb:
                extra_b.append(ca + oj - gap - oi)
    grid_b = grid_for(vb, extra_b)
    if grid_a.size == 0 or grid_b.size == 0:
        return False, math.inf
    ok, cost = evaluate({va: grid_a[:, None], vb: grid_b[None, :]})
    if ok is None:
        ok = np.ones((grid_a.size, grid_b.size), dtype=bool)
    if not bool(np.any(ok)):
        return False, math.inf
    return True, float(np.min(np.where(ok, cost, np.inf)))


def pack_best_of_cases(entities, shelf_w, cases, step=0.001):
    """(feasible, best_cost) over a list of per-case fixed-variable dicts."""
    best = math.inf
    any_feasible = False
    for fixed in cases:
        feasible, cost = pack_case_grid(entities, shelf_w, fixed, step=step)
        if feasible:
            any_feasible = True
            best = min(best, cost)
    return any_feasible, best
