"""Discrete Dirichlet minimizers of Q-valued maps and regularity diagnostics.

The energy of a field u on a weighted graph is

    E(u) = sum_edges w_ab G(u(a), u(b))^2,

with cotangent weights on triangle meshes, so E is the classical P1
Dirichlet energy when Q = 1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import brentq, linear_sum_assignment
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .domains import DomainMesh, GraphDomain
from .fracsob import SampledCurveFunction, gagliardo_seminorm


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------- matching in bulk


@lru_cache(maxsize=None)
def _perms(Q: int) -> np.ndarray:
    # lexicographic order, so argmin breaks ties lexicographically
    return np.array(list(itertools.permutations(range(Q))), dtype=np.int64)


def batch_match(A: np.ndarray, B: np.ndarray):
    """Optimal matchings between stacks of Q-points A, B of shape (E, Q, n).

    Returns ``(sigma, cost)``: A[e, i] is matched with B[e, sigma[e, i]].
    """
    E, Q, _ = A.shape
    if Q == 1:
        return np.zeros((E, 1), dtype=np.int64), ((A - B) ** 2).sum(axis=(1, 2))
    if Q <= 5:
        P = _perms(Q)
        cost = np.empty((E, len(P)))
        for p, perm in enumerate(P):
            cost[:, p] = ((A - B[:, perm]) ** 2).sum(axis=(1, 2))
        best = cost.argmin(axis=1)
        return P[best], cost[np.arange(E), best]
    sigma = np.empty((E, Q), dtype=np.int64)
    out = np.empty(E)
    for e in range(E):
        C = ((A[e][:, None, :] - B[e][None, :, :]) ** 2).sum(-1)
        _, sigma[e] = linear_sum_assignment(C)
        out[e] = C[np.arange(Q), sigma[e]].sum()
    return sigma, out


def _pairwise_max_metric(V: np.ndarray, chunk: int = 256) -> float:
    """max over pairs of G(V_i, V_j) for a stack of Q-points."""
    best = 0.0
    m = len(V)
    for i in range(0, m, chunk):
        A = V[i:i + chunk]
        for j in range(i, m, chunk):
            B = V[j:j + chunk]
            AA = np.repeat(A, len(B), axis=0)
            BB = np.tile(B, (len(A), 1, 1))
            best = max(best, float(batch_match(AA, BB)[1].max()))
    return float(np.sqrt(best))


# ---------------------------------------------------------------- graphs and fields


@dataclass
class WeightedGraph:
    """Edges (E, 2), weights (E,), vertex positions (V, d)."""

    edges: np.ndarray
    weights: np.ndarray
    positions: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @classmethod
    def from_mesh(cls, mesh: DomainMesh) -> "WeightedGraph":
        E, w = mesh.edges_and_weights()
        return cls(E, w, mesh.vertices)

    def coloring(self) -> np.ndarray:
        """Greedy vertex coloring in index order (independent sets for sweeps)."""
        if "color" not in self._cache:
            nbrs = [[] for _ in range(self.n_vertices)]
            for a, b in self.edges:
                nbrs[a].append(b)
                nbrs[b].append(a)
            color = np.full(self.n_vertices, -1, dtype=np.int64)
            for v in range(self.n_vertices):
                used = {color[u] for u in nbrs[v]}
                c = 0
                while c in used:
                    c += 1
                color[v] = c
            self._cache["color"] = color
        return self._cache["color"]


class QField:
    """Per-vertex Q-points on a weighted graph with a fixed boundary trace.

    ``values`` has shape (V, Q, n).  Vertices with ``fixed`` set are never
    updated.
    """

    def __init__(self, graph: WeightedGraph, values, fixed, mesh: Optional[DomainMesh] = None):
        self.graph = graph
        self.values = np.array(values, dtype=float)
        if self.values.ndim == 2:
            self.values = self.values[:, None, :]
        self.fixed = np.asarray(fixed, dtype=bool)
        if self.values.shape[0] != graph.n_vertices or self.fixed.shape != (graph.n_vertices,):
            raise ValueError("values and fixed mask must have one row per vertex")
        self.mesh = mesh
        self.log: list = []
        self.meta: dict = {}
        self._energy: Optional[float] = None

    @property
    def Q(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[2]

    def copy(self) -> "QField":
        f = QField(self.graph, self.values.copy(), self.fixed.copy(), self.mesh)
        f.log = list(self.log)
        f.meta = dict(self.meta)
        return f

    @property
    def energy(self) -> float:
        if self._energy is None:
            self._energy = discrete_energy(self)
        return self._energy

    def edge_sq_metric(self) -> np.ndarray:
        E = self.graph.edges
        return batch_match(self.values[E[:, 0]], self.values[E[:, 1]])[1]

    def trace_diameter(self) -> float:
        V = self.values[self.fixed]
        pts = V.reshape(-1, self.n)
        lo, hi = pts.min(0), pts.max(0)
        return float(np.linalg.norm(hi - lo))


def discrete_energy(u: QField) -> float:
    return float(u.graph.weights @ u.edge_sq_metric())


# ---------------------------------------------------------------- boundary traces


@dataclass
class BoundaryTrace:
    """Q-point values on the boundary vertices of a mesh.

    ``vertices`` lists boundary vertex ids in loop order, ``theta`` their
    loop parameter and ``values`` the (B, Q, n) data.
    """

    vertices: np.ndarray
    theta: np.ndarray
    values: np.ndarray
    tag: str

    @property
    def Q(self) -> int:
        return self.values.shape[1]

    def translate(self, shift) -> "BoundaryTrace":
        return BoundaryTrace(self.vertices, self.theta, self.values + np.asarray(shift, float),
                             self.tag)


def _boundary_loop(mesh: DomainMesh):
    ids = mesh.boundary_vertices()
    P = mesh.vertices[ids]
    theta = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2 * np.pi)
    if mesh.kind != "disk":
        # half-disk type loops: arc by angle, then the flat part from left to right
        on_arc = np.isin(ids, mesh.tagged_vertices("arc"))
        key = np.where(on_arc, theta, np.pi + 1.0 + (P[:, 0] + 1.0))
        theta = key
    order = np.argsort(theta, kind="stable")
    return ids[order], theta[order]


def trace_constant(mesh: DomainMesh, T) -> BoundaryTrace:
    T = np.atleast_2d(np.asarray(T, dtype=float))
    ids, th = _boundary_loop(mesh)
    return BoundaryTrace(ids, th, np.tile(T, (len(ids), 1, 1)), "constant")


def q_roots_values(Z: np.ndarray, d: int, Q: int) -> np.ndarray:
    """The Q complex roots of z^d, as (..., Q, 2) real arrays; 0 maps to Q zeros."""
    z = Z[..., 0] + 1j * Z[..., 1]
    r = np.abs(z) ** (d / Q)
    phi = d * np.angle(z) / Q
    k = np.arange(Q)
    w = r[..., None] * np.exp(1j * (phi[..., None] + 2 * np.pi * k / Q))
    return np.stack([w.real, w.imag], axis=-1)


def trace_q_roots(mesh: DomainMesh, d: int = 1, Q: int = 2) -> BoundaryTrace:
    """x -> {w : w^Q = x^d} on the boundary, a single-valued Q-point loop."""
    ids, th = _boundary_loop(mesh)
    return BoundaryTrace(ids, th, q_roots_values(mesh.vertices[ids], d, Q), f"q_roots({d})")


def trace_holder_random(mesh: DomainMesh, beta: float, seed: int, Q: int = 1,
                        n: int = 1, levels: int = 12) -> BoundaryTrace:
    """Random lacunary series sum 2^(-beta j) cos(2^j theta + phase), sheets offset by 3."""
    rng = np.random.default_rng(seed)
    ids, th = _boundary_loop(mesh)
    P = mesh.vertices[ids]
    theta = np.arctan2(P[:, 1], P[:, 0])
    vals = np.zeros((len(ids), Q, n))
    for q in range(Q):
        for c in range(n):
            ph = rng.uniform(0, 2 * np.pi, size=levels)
            amp = rng.uniform(0.5, 1.0, size=levels)
            js = np.arange(levels)
            vals[:, q, c] = (amp * 2.0 ** (-beta * js)
                             * np.cos(np.outer(theta, 2.0 ** js) + ph)).sum(1) + 3.0 * q
    return BoundaryTrace(ids, th, vals, f"holder_random({beta},{seed})")


def trace_sampled(mesh: DomainMesh, path: str) -> BoundaryTrace:
    """Trace read from a QField CSV; rows for non-boundary vertices are ignored."""
    vals = read_qfield_values(path)
    ids, th = _boundary_loop(mesh)
    return BoundaryTrace(ids, th, vals[ids], f"sampled({path})")


# ---------------------------------------------------------------- relaxation


def _initial_values(graph: WeightedGraph, trace: BoundaryTrace, fixed, restart: int, seed: int):
    V = graph.n_vertices
    Q, n = trace.values.shape[1:]
    vals = np.zeros((V, Q, n))
    vals[trace.vertices] = trace.values
    inner = np.flatnonzero(~fixed)
    if restart == 0:
        # copy the trace value of the nearest boundary vertex
        tree = cKDTree(graph.positions[trace.vertices])
        _, near = tree.query(graph.positions[inner])
        vals[inner] = trace.values[near]
    else:
        rng = np.random.default_rng([seed, restart])
        pts = trace.values.reshape(-1, n)
        center = pts.mean(0)
        scale = pts.std(0) + 1e-300
        vals[inner] = center + scale * rng.standard_normal((len(inner), Q, n))
    return vals


def _local_sweep(u: QField, check: bool = True) -> float:
    """One Gauss-Seidel pass over color classes; returns the max vertex move.

    Each free vertex is replaced by the weighted per-sheet average of its
    optimally matched neighbors, which cannot raise its local energy.
    """
    g = u.graph
    color = g.coloring()
    E, w = g.edges, g.weights
    a_all = np.concatenate([E[:, 0], E[:, 1]])
    b_all = np.concatenate([E[:, 1], E[:, 0]])
    w_all = np.concatenate([w, w])
    Q, n = u.Q, u.n
    move = 0.0
    for c in range(color.max() + 1):
        sel = (color[a_all] == c) & ~u.fixed[a_all]
        if not sel.any():
            continue
        a, b, ww = a_all[sel], b_all[sel], w_all[sel]
        ua, ub = u.values[a], u.values[b]
        sigma, cost = batch_match(ua, ub)
        partner = np.take_along_axis(ub, sigma[:, :, None], axis=1)
        acc = np.zeros((g.n_vertices, Q, n))
        np.add.at(acc, a, ww[:, None, None] * partner)
        W = np.bincount(a, weights=ww, minlength=g.n_vertices)
        verts = np.unique(a)
        new = acc[verts] / W[verts, None, None]
        before = np.bincount(a, weights=ww * cost, minlength=g.n_vertices)[verts]
        old = u.values[verts].copy()
        u.values[verts] = new
        if check:
            after_cost = batch_match(u.values[a], ub)[1]
            after = np.bincount(a, weights=ww * after_cost, minlength=g.n_vertices)[verts]
            tol = 1e-12 * (1.0 + np.abs(before))
            if np.any(after > before + tol):
                raise NumericalError("a vertex update raised the local energy")
        move = max(move, float(np.sqrt(batch_match(old, new)[1].max())))
    u._energy = None
    return move


def _global_step(u: QField) -> float:
    """Minimize the energy with all edge matchings frozen (one sparse solve)."""
    g = u.graph
    E, w = g.edges, g.weights
    Q, n = u.Q, u.n
    sigma, _ = batch_match(u.values[E[:, 0]], u.values[E[:, 1]])
    rows = (E[:, 0][:, None] * Q + np.arange(Q)).ravel()
    cols = (E[:, 1][:, None] * Q + sigma).ravel()
    ww = np.repeat(w, Q)
    N = g.n_vertices * Q
    L = sparse.coo_matrix(
        (np.concatenate([ww, ww, -ww, -ww]),
         (np.concatenate([rows, cols, rows, cols]), np.concatenate([rows, cols, cols, rows]))),
        shape=(N, N)).tocsc()
    free = np.repeat(~u.fixed, Q)
    X = u.values.reshape(N, n)
    Lff = L[free][:, free]
    rhs = -(L[free][:, ~free] @ X[~free])
    lu = splu(Lff.tocsc())
    new = X.copy()
    new[free] = lu.solve(rhs)
    new = new.reshape(u.values.shape)
    inner = ~u.fixed
    move = float(np.sqrt(batch_match(u.values[inner], new[inner])[1].max())) if inner.any() else 0.0
    u.values = new
    u._energy = None
    return move


def _relax_once(u: QField, sweeps: int, tol: float, method: str):
    log = []
    converged = False
    for k in range(1, sweeps + 1):
        e0 = u.energy
        move = _global_step(u) if method == "global" else _local_sweep(u)
        e1 = u.energy
        if e1 > e0 * (1 + 1e-12) + 1e-14:
            raise NumericalError(f"energy increased in sweep {k}: {e0!r} -> {e1!r}")
        log.append((k, e1, move))
        if move < tol:
            converged = True
            break
    if method == "global":
        # a local pass confirms stationarity and checks each vertex update
        move = _local_sweep(u)
        log.append((len(log) + 1, u.energy, move))
        converged = converged and move < max(tol, 1e-12)
    return log, converged


def relax(u: QField, sweeps: int = 200, restarts: int = 8, seed: int = 0,
          method: str = "global", trace: Optional[BoundaryTrace] = None) -> QField:
    """Approximate a Dirichlet minimizer with the boundary values of ``u``.

    Matching and averaging alternate: with every edge matching frozen the
    energy is a convex quadratic, minimized either vertex by vertex
    (``method="local"``) or for all free vertices at once
    (``method="global"``).  Both steps never raise the energy.  Restart 0
    starts from ``u`` itself; restarts 1.. start from seeded random
    interiors.  The lowest-energy result is returned, with ``log`` holding
    (sweep, energy, max_move) rows and ``meta`` the convergence data.
    """
    if method not in ("global", "local"):
        raise ValueError("method must be 'global' or 'local'")
    if trace is None:
        ids = np.flatnonzero(u.fixed)
        trace = BoundaryTrace(ids, np.arange(len(ids), dtype=float), u.values[ids], "field")
    diam = u.trace_diameter()
    tol = 1e-9 * diam if diam > 0 else 1e-14
    best = None
    for r in range(max(1, restarts)):
        v = u.copy()
        if r > 0:
            v.values = _initial_values(u.graph, trace, u.fixed, r, seed)
        v._energy = None
        log, conv = _relax_once(v, sweeps, tol, method)
        v.log = log
        v.meta = {"converged": conv, "residual": log[-1][2], "sweeps": len(log),
                  "restart": r, "restarts": max(1, restarts), "tolerance": tol}
        if best is None or v.energy < best.energy * (1 - 1e-12):
            best = v
    return best


def field_from_trace(mesh: DomainMesh, trace: BoundaryTrace, seed: int = 0) -> QField:
    """Field with the trace on the boundary and a nearest-trace interior."""
    g = WeightedGraph.from_mesh(mesh)
    fixed = np.zeros(mesh.n_vertices, dtype=bool)
    fixed[trace.vertices] = True
    vals = _initial_values(g, trace, fixed, 0, seed)
    return QField(g, vals, fixed, mesh)


def minimize(mesh: DomainMesh, trace: BoundaryTrace, sweeps: int = 200, restarts: int = 8,
             seed: int = 0, method: str = "global") -> QField:
    u = field_from_trace(mesh, trace, seed)
    return relax(u, sweeps=sweeps, restarts=restarts, seed=seed, method=method, trace=trace)


# ---------------------------------------------------------------- branch solution


def branch_solution(X: np.ndarray) -> np.ndarray:
    """{+-sqrt(z)} at points X (..., 2): the two-valued minimizer with trace q_roots(1)."""
    return q_roots_values(X, 1, 2)


def pointwise_error(u: QField, exact: np.ndarray) -> np.ndarray:
    return np.sqrt(batch_match(u.values, exact)[1])


# ---------------------------------------------------------------- diagnostics


def clipped_fraction(P: np.ndarray, R: np.ndarray, z, r: float) -> np.ndarray:
    """Fraction of each segment [P_e, R_e] lying in the closed disk B_r(z)."""
    z = np.asarray(z, dtype=float)
    d = R - P
    A = (d * d).sum(1)
    B = ((P - z) * d).sum(1)
    C = ((P - z) ** 2).sum(1) - r * r
    disc = B * B - A * C
    ok = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    Asafe = np.where(A > 0, A, 1.0)
    t0 = np.clip((-B - sq) / Asafe, 0.0, 1.0)
    t1 = np.clip((-B + sq) / Asafe, 0.0, 1.0)
    return np.where(ok, t1 - t0, 0.0)


def ball_energy(u: QField, z, r: float) -> float:
    """Energy of the edges inside B_r(z), partial edges by clipped length."""
    g = u.graph
    P, R = g.positions[g.edges[:, 0]], g.positions[g.edges[:, 1]]
    return float((g.weights * u.edge_sq_metric() * clipped_fraction(P, R, z, r)).sum())


def morrey_quotient(u: QField, z, radii: Sequence[float], alpha: float) -> np.ndarray:
    """r^(-2 alpha) times the energy in B_r(z) (two dimensions)."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radii must be positive")
    span = np.linalg.norm(u.graph.positions - np.asarray(z, float), axis=1).max()
    if np.any(radii > span * (1 + 1e-12)):
        raise ValueError("radii must stay within the mesh")
    return np.array([ball_energy(u, z, r) * r ** (-2 * alpha) for r in radii])


def oscillation(u: QField, z, r: float) -> float:
    inside = np.linalg.norm(u.graph.positions - np.asarray(z, float), axis=1) <= r
    if inside.sum() < 2:
        raise ValueError(f"fewer than two vertices in B_{r}")
    return _pairwise_max_metric(u.values[inside])


def holder_exponent_fit(u: QField, z, radii: Sequence[float]):
    """Slope of log osc(u, B_r(z)) against log r, with the R^2 of the fit."""
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii.size < 4 or radii[-1] < 10 * radii[0] * (1 - 1e-9):
        raise ValueError("need at least 4 radii spanning a decade")
    osc = np.array([oscillation(u, z, r) for r in radii])
    if np.any(osc <= 0):
        return 0.0, 0.0
    x, y = np.log(radii), np.log(osc)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss if ss > 0 else 1.0
    return float(slope), float(r2)


@dataclass
class CylinderLift:
    field: QField
    length: float
    layers: int
    base_energy: float

    @property
    def energy(self) -> float:
        return self.field.energy

    @property
    def ratio(self) -> float:
        return self.energy / self.base_energy if self.base_energy > 0 else float("nan")

    def vertical_energy(self) -> float:
        V = self.field.graph.n_vertices // self.layers
        nv = V * (self.layers - 1)
        e = self.field.graph.edges
        vert = (e[:, 1] - e[:, 0]) == V
        return float((self.field.graph.weights[vert] * self.field.edge_sq_metric()[vert]).sum()) \
            if nv else 0.0


def lift_to_cylinder(u: QField, layers: int, length: float = 1.0) -> CylinderLift:
    """U(x, t) = u(x) on the prism graph over Omega x [0, length].

    Layer edges carry w_ab dt (half at the two end layers) and vertical
    edges carry the dual vertex area / dt, so the product field has energy
    exactly length * E(u).  End layers and the lateral boundary are fixed.
    """
    if layers < 2:
        raise ValueError("layers must be at least 2")
    if u.mesh is None:
        raise ValueError("the field must live on a mesh")
    g = u.graph
    V = g.n_vertices
    dt = length / (layers - 1)
    area = u.mesh.vertex_areas()
    edges, weights = [], []
    for l in range(layers):
        c = 0.5 if l in (0, layers - 1) else 1.0
        edges.append(g.edges + l * V)
        weights.append(g.weights * c * dt)
        if l + 1 < layers:
            edges.append(np.column_stack([np.arange(V) + l * V, np.arange(V) + (l + 1) * V]))
            weights.append(area / dt)
    t = np.repeat(np.arange(layers) * dt, V)
    pos = np.column_stack([np.tile(g.positions, (layers, 1)), t])
    G = WeightedGraph(np.vstack(edges), np.concatenate(weights), pos)
    fixed = np.tile(u.fixed, layers)
    fixed[:V] = True
    fixed[-V:] = True
    lifted = QField(G, np.tile(u.values, (layers, 1, 1)), fixed)
    return CylinderLift(lifted, length, layers, discrete_energy(u))


# ---------------------------------------------------------------- boundary probe


def _locate(mesh: DomainMesh, pts: np.ndarray):
    """Triangle index and barycentric coordinates for each point."""
    T = mesh.triangles
    P = mesh.vertices[T]
    tree = cKDTree(P.mean(1))
    k = min(24, len(T))
    _, cand = tree.query(pts, k=k)
    tri = np.full(len(pts), -1)
    bary = np.zeros((len(pts), 3))
    best = np.full(len(pts), -np.inf)
    for j in range(k):
        c = cand[:, j]
        A, B, C = P[c, 0], P[c, 1], P[c, 2]
        v0, v1, v2 = B - A, C - A, pts - A
        den = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
        l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / den
        l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / den
        lam = np.column_stack([1 - l1 - l2, l1, l2])
        score = lam.min(1)
        upd = score > best
        best = np.where(upd, score, best)
        tri = np.where(upd, c, tri)
        bary[upd] = lam[upd]
    # curved boundaries sag slightly outside the polygonal mesh
    if np.any(best < -0.05):
        raise ValueError("points outside the mesh")
    return tri, np.clip(bary, 0, None) / np.clip(bary, 0, None).sum(1, keepdims=True)


def _interp_simplex(vals: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Per-sheet interpolation after matching the other corners to the first."""
    ref = vals[:, 0]
    out = lam[:, 0, None, None] * ref
    for j in range(1, vals.shape[1]):
        sigma, _ = batch_match(ref, vals[:, j])
        out = out + lam[:, j, None, None] * np.take_along_axis(vals[:, j], sigma[:, :, None], axis=1)
    return out


def interpolate(u: QField, pts: np.ndarray) -> np.ndarray:
    """Piecewise-linear Q-valued interpolation of a mesh field at points."""
    tri, lam = _locate(u.mesh, pts)
    return _interp_simplex(u.values[u.mesh.triangles[tri]], lam)


def _boundary_trace_on_graph(u: QField, dom: GraphDomain, r: float, M: int):
    """Trace of u on Gamma_F within B_r, resampled on a uniform x1 grid."""
    h = lambda x: x * x + float(dom.F(np.array([x]))[0]) ** 2 - r * r
    xl, xr = brentq(h, -r * 1.5, 0.0), brentq(h, 0.0, r * 1.5)
    x = np.linspace(xl, xr, M)
    ids = u.mesh.tagged_vertices("graph")
    order = np.argsort(u.mesh.vertices[ids, 0])
    ids = ids[order]
    bx = u.mesh.vertices[ids, 0]
    k = np.clip(np.searchsorted(bx, x) - 1, 0, len(bx) - 2)
    lam = ((x - bx[k]) / (bx[k + 1] - bx[k]))[:, None]
    vals = np.stack([u.values[ids[k]], u.values[ids[k + 1]]], axis=1)
    out = _interp_simplex(vals, np.column_stack([1 - lam[:, 0], lam[:, 0]]))
    return SampledCurveFunction(x, out, kind="graph", F=dom.F, dF=dom.dF)


def _arc_tangential(u: QField, dom: GraphDomain, r: float, M: int) -> float:
    """int over dB_r in Omega_F of |D_tau u|^2 from interpolated samples."""
    g = lambda p: r * np.sin(p) - float(dom.F(np.array([r * np.cos(p)]))[0])
    # the circle meets the graph once near angle 0 and once near pi
    p0 = brentq(g, -0.5, 0.5) if g(-0.5) * g(0.5) < 0 else 0.0
    p1 = brentq(g, np.pi - 0.5, np.pi + 0.5) if g(np.pi - 0.5) * g(np.pi + 0.5) < 0 else np.pi
    phi = np.linspace(p0, p1, M)
    pts = r * np.column_stack([np.cos(phi), np.sin(phi)])
    vals = interpolate(u, pts)
    d2 = batch_match(vals[:-1], vals[1:])[1]
    ds = r * np.diff(phi)
    return float((d2 / ds).sum())


@dataclass
class ProbeRow:
    r: float
    interior: float
    tangential: float
    gagliardo2: float
    implied: float

    def holds(self, epsilon: float, s: float, C: float) -> bool:
        rhs = (1 + epsilon) * self.r * self.tangential + C / epsilon * self.r ** (2 * s - 1) * self.gagliardo2
        return self.interior <= rhs * (1 + 1e-9) + 1e-14


def boundary_inequality_probe(u: QField, dom: GraphDomain, s: float, epsilon: float,
                              radii: Sequence[float], samples: int = 200) -> list:
    """Terms of the boundary energy inequality at z = 0, one row per radius.

    Each row holds the interior energy in B_r, r times the tangential energy
    on the arc, the squared boundary seminorm and the implied C such that
    E <= (1 + eps) r T + (C / eps) r^(2s - 1) [u]^2 holds with equality
    (0 when the first term alone suffices).
    """
    if not 0.5 < s <= 1.0:
        raise ValueError("s must lie in (1/2, 1]")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if u.mesh is None or u.mesh.kind not in ("graph", "halfdisk"):
        raise ValueError("the probe needs a field on a graph-domain mesh")
    rows = []
    for r in radii:
        E = ball_energy(u, np.zeros(2), r)
        T = _arc_tangential(u, dom, r, samples)
        tr = _boundary_trace_on_graph(u, dom, r, samples)
        if s == 1.0:
            G2 = float((batch_match(tr.values[:-1], tr.values[1:])[1] / tr.edge_lengths()).sum())
        else:
            G2 = gagliardo_seminorm(tr, s) ** 2
        excess = E - (1 + epsilon) * r * T
        if excess <= 0:
            C = 0.0
        elif G2 > 0:
            C = epsilon * excess / (r ** (2 * s - 1) * G2)
        else:
            C = float("inf")
        rows.append(ProbeRow(float(r), E, T, G2, C))
    return rows


# ---------------------------------------------------------------- files


def write_qfield(u: QField, path: str) -> None:
    Q, n = u.Q, u.n
    cols = ",".join(f"v{q + 1}{c + 1}" for q in range(Q) for c in range(n))
    with open(path, "w") as fh:
        fh.write(f"vertex_id,Q,n,{cols}\n")
        for i, v in enumerate(u.values):
            fh.write(f"{i},{Q},{n}," + ",".join(repr(float(x)) for x in v.ravel()) + "\n")


def read_qfield_values(path: str) -> np.ndarray:
    with open(path) as fh:
        fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    Q, n = int(rows[0][1]), int(rows[0][2])
    vals = np.empty((len(rows), Q, n))
    for row in rows:
        vals[int(row[0])] = np.array([float(x) for x in row[3:]]).reshape(Q, n)
    return vals


def write_runlog(u: QField, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("sweep,energy,max_move\n")
        for k, e, m in u.log:
            fh.write(f"{k},{e!r},{m!r}\n")
