"""Bilipschitz maps between model domains and structured triangle meshes.

Domains are the unit disk, the upper half-disk B1+ and the part of the unit
disk above the graph of a C^1 function F with F(0) = 0 and small slope.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

C_SHIFT = 0.5  # the ball map is centered at c = e_N / 2
SEAM = -1.0 / np.sqrt(5.0)


class NumericalError(RuntimeError):
    pass


# ---------------------------------------------------------------- ball -> half ball


def s_profile(xN):
    """Radial scale of the ball map as a function of the last coordinate of x/|x|.

    (-xN + sqrt(xN^2 + 3)) / 2 for xN >= -1/sqrt(5), and -1/(2 xN) below.
    """
    xN = np.asarray(xN, dtype=float)
    upper = 0.5 * (-xN + np.sqrt(xN**2 + 3.0))
    with np.errstate(divide="ignore"):
        lower = -0.5 / xN
    return np.where(xN >= SEAM, upper, lower)


def s_profile_derivative(xN):
    xN = np.asarray(xN, dtype=float)
    upper = -0.5 * (1.0 - xN / np.sqrt(xN**2 + 3.0))
    with np.errstate(divide="ignore"):
        lower = 0.5 / xN**2
    return np.where(xN >= SEAM, upper, lower)


def _unit_last(X):
    r = np.linalg.norm(X, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    return X[..., -1] / safe, r


def map_ball_to_halfball(X, extend: bool = False) -> np.ndarray:
    """G(x) = c + s(x_hat) x, from the closed unit ball onto the closed upper half ball.

    ``extend=True`` evaluates the same formula outside the unit ball.
    """
    X = np.asarray(X, dtype=float)
    xN, r = _unit_last(X)
    if not extend and np.any(r > 1 + 1e-12):
        raise ValueError("points must lie in the closed unit ball")
    c = np.zeros(X.shape[-1])
    c[-1] = C_SHIFT
    return c + s_profile(xN)[..., None] * X


def map_halfball_to_ball(Y) -> np.ndarray:
    """Inverse of map_ball_to_halfball: (y - c) / s((y - c)_hat)."""
    Y = np.asarray(Y, dtype=float)
    c = np.zeros(Y.shape[-1])
    c[-1] = C_SHIFT
    W = Y - c
    wN, _ = _unit_last(W)
    return W / s_profile(wN)[..., None]


# ---------------------------------------------------------------- graph domains


@dataclass
class GraphDomain:
    """{x_2 > F(x_1)} intersected with the unit disk.

    ``period`` (optional) is the length scale of oscillation of F; meshes
    refuse to resolve it with fewer than 8 boundary vertices.
    """

    F: Callable
    dF: Callable
    eps_F: Optional[float] = None
    radius: float = 1.0
    period: Optional[float] = None
    flat: bool = field(init=False)

    def __post_init__(self):
        x = np.linspace(-self.radius, self.radius, 4001)
        slope = float(np.abs(self.dF(x)).max())
        if self.eps_F is None:
            self.eps_F = slope
        elif slope > self.eps_F * (1 + 1e-12):
            raise ValueError(f"|F'| reaches {slope:.4g}, above eps_F = {self.eps_F}")
        if abs(float(self.F(np.array([0.0]))[0])) > 1e-12:
            raise ValueError("F(0) must vanish")
        self.flat = abs(float(self.dF(np.array([0.0]))[0])) < 1e-12

    @classmethod
    def flat_boundary(cls) -> "GraphDomain":
        return cls(lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                   lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0)


def smooth_cutoff(x, inner: float = 1.0, outer: float = 2.0):
    """C^infinity function equal to 1 on |x| <= inner and 0 for |x| >= outer."""
    x = np.abs(np.asarray(x, dtype=float))

    def psi(t):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)

    u = (outer - x) / (outer - inner)
    return psi(u) / (psi(u) + psi(1 - u))


def _dcutoff(x, inner=1.0, outer=2.0, e=1e-6):
    return (smooth_cutoff(x + e, inner, outer) - smooth_cutoff(x - e, inner, outer)) / (2 * e)


def example_graph(name: str) -> GraphDomain:
    """Shipped boundary profiles with slope at most 0.2 on [-1, 1]."""
    if name == "flat":
        return GraphDomain.flat_boundary()
    if name == "parabola":
        F = lambda x: 0.1 * np.asarray(x) ** 2 * smooth_cutoff(x)
        dF = lambda x: 0.2 * np.asarray(x) * smooth_cutoff(x) + 0.1 * np.asarray(x) ** 2 * _dcutoff(x)
    elif name == "sine":
        F = lambda x: 0.2 * np.sin(x) * smooth_cutoff(x)
        dF = lambda x: 0.2 * np.cos(x) * smooth_cutoff(x) + 0.2 * np.sin(x) * _dcutoff(x)
    elif name == "wave":
        F = lambda x: 0.05 * (1 - np.cos(4 * np.asarray(x))) * smooth_cutoff(x)
        dF = lambda x: 0.2 * np.sin(4 * np.asarray(x)) * smooth_cutoff(x) \
            + 0.05 * (1 - np.cos(4 * np.asarray(x))) * _dcutoff(x)
        return GraphDomain(F, dF, radius=1.0, period=np.pi / 2)
    else:
        raise ValueError(f"unknown graph profile {name!r}")
    return GraphDomain(F, dF, radius=1.0)


class GraphMap:
    """G_F(x) = psi(s(x_hat) x) from B1+ onto the graph domain, psi(x) = (x1, x2 + F(x1)).

    s(y) solves |psi(s y)| = 1 for each direction y in the upper half-circle.
    """

    def __init__(self, dom: GraphDomain, tol: float = 1e-14, maxiter: int = 100):
        if not dom.eps_F < 0.25:
            raise ValueError(f"the map needs eps_F < 1/4, got {dom.eps_F}")
        self.dom = dom
        self.tol = tol
        self.maxiter = maxiter

    def _h(self, y, s):
        p = s * y[..., 0]
        q = s * y[..., 1] + self.dom.F(p)
        return p**2 + q**2

    def _dh(self, y, s):
        p = s * y[..., 0]
        q = s * y[..., 1] + self.dom.F(p)
        return 2 * p * y[..., 0] + 2 * q * (y[..., 1] + self.dom.dF(p) * y[..., 0])

    def scale(self, y) -> np.ndarray:
        """s(y) for unit vectors y with y_2 >= 0; safeguarded Newton with bisection."""
        y = np.asarray(y, dtype=float)
        eps = self.dom.eps_F
        # widened by a rounding margin so that eps_F = 0 still brackets s = 1
        lo = np.full(y.shape[:-1], (1.0 - 1e-12) / (1.0 + eps))
        hi = np.full(y.shape[:-1], (1.0 + 1e-12) / (1.0 - eps))
        if np.any(self._h(y, lo) > 1) or np.any(self._h(y, hi) < 1):
            raise NumericalError("root of |psi(s y)| = 1 is not bracketed")
        s = np.ones(y.shape[:-1])
        for _ in range(self.maxiter):
            g = self._h(y, s) - 1.0
            lo = np.where(g < 0, s, lo)
            hi = np.where(g > 0, s, hi)
            step = g / self._dh(y, s)
            s_new = s - step
            bad = ~((s_new > lo) & (s_new < hi)) | ~np.isfinite(s_new)
            s_new = np.where(bad, 0.5 * (lo + hi), s_new)
            done = np.abs(s_new - s) <= self.tol * s
            s = s_new
            if np.all(done):
                return s
        raise NumericalError(
            f"scale solve did not converge; worst residual {np.abs(self._h(y, s) - 1).max():.3e}")

    def forward(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if np.any(X[..., 1] < -1e-9) or np.any(np.linalg.norm(X, axis=-1) > 1 + 1e-9):
            raise ValueError("points must lie in the closed upper half-disk")
        r = np.linalg.norm(X, axis=-1)
        y = X / np.where(r > 0, r, 1.0)[..., None]
        y = np.where((r > 0)[..., None], y, np.array([0.0, 1.0]))
        Z = self.scale(y)[..., None] * X
        return np.stack([Z[..., 0], Z[..., 1] + self.dom.F(Z[..., 0])], axis=-1)

    def inverse(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        W = np.stack([Z[..., 0], Z[..., 1] - self.dom.F(Z[..., 0])], axis=-1)
        r = np.linalg.norm(W, axis=-1)
        y = W / np.where(r > 0, r, 1.0)[..., None]
        y = np.where((r > 0)[..., None], y, np.array([0.0, 1.0]))
        return W / self.scale(y)[..., None]

    def derivative_deviation(self, X, step: float = 1e-6) -> np.ndarray:
        """||DG_F(x) - 1|| (spectral norm) by central differences."""
        X = np.asarray(X, dtype=float)
        J = np.empty(X.shape[:-1] + (2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            J[..., :, k] = (self.forward(X + e) - self.forward(X - e)) / (2 * step)
        return np.linalg.norm(J - np.eye(2), ord=2, axis=(-2, -1))

    def inverse_derivative_deviation(self, Z, step: float = 1e-6) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        J = np.empty(Z.shape[:-1] + (2, 2))
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            J[..., :, k] = (self.inverse(Z + e) - self.inverse(Z - e)) / (2 * step)
        return np.linalg.norm(J - np.eye(2), ord=2, axis=(-2, -1))


def map_halfball_to_graphdomain(dom: GraphDomain) -> GraphMap:
    return GraphMap(dom)


def rescale_graph(dom: GraphDomain, z1: float, r: float) -> GraphDomain:
    """Graph domain of {x : z + r x in Omega}, z = (z1, F(z1)) on the boundary.

    F_(z,r)(x) = (F(z1 + r x) - F(z1)) / r, so its slope on [-1, 1] is the
    slope of F on [z1 - r, z1 + r].
    """
    if r <= 0:
        raise ValueError("r must be positive")
    F0 = float(dom.F(np.array([z1]))[0])
    F = lambda x: (dom.F(z1 + r * np.asarray(x)) - F0) / r
    dF = lambda x: dom.dF(z1 + r * np.asarray(x))
    period = None if dom.period is None else dom.period / r
    return GraphDomain(F, dF, radius=1.0, period=period)


# ---------------------------------------------------------------- meshes


@dataclass
class DomainMesh:
    """Triangulation with tagged boundary edges ('arc' or 'graph')."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    h: float
    kind: str
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def areas(self) -> np.ndarray:
        P = self.vertices[self.triangles]
        a, b = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    def angles(self) -> np.ndarray:
        """Interior angle at each corner of each triangle."""
        P = self.vertices[self.triangles]
        out = np.empty(self.triangles.shape)
        for k in range(3):
            u = P[:, (k + 1) % 3] - P[:, k]
            v = P[:, (k + 2) % 3] - P[:, k]
            cosang = (u * v).sum(1) / np.linalg.norm(u, axis=1) / np.linalg.norm(v, axis=1)
            out[:, k] = np.arccos(np.clip(cosang, -1, 1))
        return out

    def min_angle_degrees(self) -> float:
        return float(np.degrees(self.angles().min()))

    def edges_and_weights(self):
        """Unique edges (E, 2) with a < b and cotangent weights (cot a + cot b) / 2."""
        if "edges" not in self._cache:
            self._cache["edges"] = _cot_weights(self.vertices, self.triangles)
        return self._cache["edges"]

    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.boundary_vertices()] = True
        return m

    def vertex_areas(self) -> np.ndarray:
        """Barycentric dual area of each vertex."""
        A = self.areas() / 3.0
        return np.bincount(self.triangles.ravel(), weights=np.repeat(A, 3),
                           minlength=self.n_vertices)

    def tagged_vertices(self, tag: str) -> np.ndarray:
        return np.unique(self.boundary_edges[self.boundary_tags == tag])


def _orient(vertices, T):
    T = np.array(T, dtype=np.int64)
    P = vertices[T]
    a, b = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    neg = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0] < 0
    T[neg] = T[neg][:, [0, 2, 1]]
    return T


def _cot_weights(V, T):
    P = V[T]
    rows, wts = [], []
    for k in range(3):
        i, j = T[:, (k + 1) % 3], T[:, (k + 2) % 3]
        u = P[:, (k + 1) % 3] - P[:, k]
        v = P[:, (k + 2) % 3] - P[:, k]
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        rows.append(np.column_stack([np.minimum(i, j), np.maximum(i, j)]))
        wts.append(0.5 * (u * v).sum(1) / cross)
    rows = np.vstack(rows)
    E, inv = np.unique(rows, axis=0, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=np.concatenate(wts), minlength=len(E))
    return E, w


def _lawson_flips(V, T, max_rounds=50):
    """Flip interior edges with negative cotangent weight (Delaunay repair)."""
    T = T.copy()
    for _ in range(max_rounds):
        E, w = _cot_weights(V, T)
        bad = {tuple(e) for e in E[w < -1e-14]}
        if not bad:
            break
        owner = {}
        for t, tri in enumerate(T):
            for k in range(3):
                a, b = tri[k], tri[(k + 1) % 3]
                owner.setdefault((min(a, b), max(a, b)), []).append(t)
        used = set()
        flipped = False
        for e in bad:
            ts = owner.get(e, [])
            if len(ts) != 2 or ts[0] in used or ts[1] in used:
                continue
            a, b = e
            c = [v for v in T[ts[0]] if v not in e][0]
            d = [v for v in T[ts[1]] if v not in e][0]
            new = _orient(V, [(c, d, a), (c, d, b)])
            P = V[new]
            x, y = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
            if np.any(np.abs(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]) < 1e-15):
                continue
            # the quad must be convex: a and b on opposite sides of cd
            def side(p):
                u, w = V[d] - V[c], V[p] - V[c]
                return u[0] * w[1] - u[1] * w[0]

            if side(a) * side(b) >= 0:
                continue
            T[ts[0]], T[ts[1]] = new
            used.update(ts)
            flipped = True
        if not flipped:
            break
    return T


def _polar_points(K, half):
    pts = [(0.0, 0.0)]
    for k in range(1, K + 1):
        n = 3 * k if half else 6 * k
        a = np.pi * np.arange(n + 1) / n if half else 2 * np.pi * np.arange(n) / n
        r = k / K
        ring = np.column_stack([r * np.cos(a), r * np.sin(a)])
        if half:
            ring[0], ring[-1] = (r, 0.0), (-r, 0.0)
        pts.extend(map(tuple, ring))
    return np.array(pts)


def _boundary_edges(T):
    E = np.sort(np.vstack([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]]), axis=1)
    uniq, count = np.unique(E, axis=0, return_counts=True)
    return uniq[count == 1]


def _zipper(inner, outer, ang_in, ang_out, closed):
    """Triangles between two rings of vertex ids ordered by angle."""
    tris = []
    ni, no = len(inner), len(outer)
    end_i, end_o = (ni, no) if closed else (ni - 1, no - 1)

    def nxt(ids, ang, k, n):
        if closed and k + 1 == n:
            return ids[0], ang[0] + 2 * np.pi
        return ids[k + 1], ang[k + 1]

    i = j = 0
    while i < end_i or j < end_o:
        vi, ai = nxt(inner, ang_in, i, ni) if i < end_i else (None, np.inf)
        vo, ao = nxt(outer, ang_out, j, no) if j < end_o else (None, np.inf)
        if ai <= ao:
            tris.append((inner[i % ni], outer[j % no], vi))
            i += 1
        else:
            tris.append((inner[i % ni], outer[j % no], vo))
            j += 1
    return tris


def _polar_mesh(h, half):
    """Concentric rings of spacing 1/K, K = ceil(1/h), zipped into triangles.

    Ring k carries 6k points (3k + 1 on the half circle), so all edges have
    length close to 1/K.  Edge flips then remove negative cotangent weights.
    """
    K = int(np.ceil(1.0 / h - 1e-12))
    V = _polar_points(K, half)
    start, tris = 1, []
    prev_ids, prev_ang = np.array([0]), np.zeros(1)
    for k in range(1, K + 1):
        n = 3 * k + 1 if half else 6 * k
        ids = np.arange(start, start + n)
        ang = np.mod(np.arctan2(V[ids, 1], V[ids, 0]), 2 * np.pi)
        if half:
            ang[-1] = np.pi
        if k == 1:
            m = n - 1 if half else n
            tris += [(0, ids[j], ids[(j + 1) % n]) for j in range(m)]
        else:
            tris += _zipper(prev_ids, ids, prev_ang, ang, closed=not half)
        prev_ids, prev_ang, start = ids, ang, start + n
    T = _lawson_flips(V, _orient(V, tris))
    B = _boundary_edges(T)
    if half:
        flat = (np.abs(V[B[:, 0], 1]) < 1e-14) & (np.abs(V[B[:, 1], 1]) < 1e-14)
        tags = np.where(flat, "graph", "arc")
    else:
        tags = np.array(["arc"] * len(B))
    return V, T, B, tags


def mesh_domain(kind: str, h: float, F: Optional[GraphDomain] = None) -> DomainMesh:
    """Structured polar mesh of the disk or half-disk, or its image in a graph domain.

    The graph-domain mesh is the half-disk mesh pushed through G_F, so
    boundary vertices land exactly on the graph and on the unit circle.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    if kind == "disk":
        V, T, B, tags = _polar_mesh(h, half=False)
    elif kind == "halfdisk":
        V, T, B, tags = _polar_mesh(h, half=True)
    elif kind == "graph":
        if F is None:
            raise ValueError("graph meshes need a GraphDomain")
        V, T, B, tags = _polar_mesh(h, half=True)
        K = int(np.ceil(1.0 / h - 1e-12))
        if F.period is not None and F.period * K < 8:
            raise ValueError(
                f"h = {h} gives {F.period * K:.1f} boundary vertices per period of F; "
                "at least 8 are needed")
        V = GraphMap(F).forward(V)
        T = _lawson_flips(V, T)
    else:
        raise ValueError(f"unknown domain kind {kind!r}")
    return DomainMesh(V, T, B, tags, h, kind)


def rescale_domain(mesh: DomainMesh, z, r: float, F: Optional[GraphDomain] = None) -> DomainMesh:
    """Mesh of {x : z + r x in Omega} within B_1 at the same mesh size.

    Supported for boundary points z on the flat or graph part of the
    half-disk and graph domains.
    """
    z = np.asarray(z, dtype=float)
    if mesh.kind == "halfdisk":
        if abs(z[1]) > 1e-12 or abs(z[0]) + r > 1 + 1e-12:
            raise ValueError("z must lie on the diameter with B_r(z) inside the unit disk")
        return mesh_domain("halfdisk", mesh.h)
    if mesh.kind == "graph":
        if F is None:
            raise ValueError("the graph domain is needed to rescale")
        if abs(float(F.F(np.array([z[0]]))[0]) - z[1]) > 1e-10:
            raise ValueError("z must lie on the graph")
        return mesh_domain("graph", mesh.h, rescale_graph(F, float(z[0]), r))
    raise ValueError(f"rescaling is not supported for {mesh.kind!r} meshes")


# ---------------------------------------------------------------- mesh files


def write_mesh(mesh: DomainMesh, prefix: str) -> list:
    """Write <prefix>_vertices.csv, <prefix>_triangles.csv, <prefix>_boundary.csv."""
    paths = [f"{prefix}_vertices.csv", f"{prefix}_triangles.csv", f"{prefix}_boundary.csv"]
    with open(paths[0], "w") as fh:
        fh.write(f"# h={float(mesh.h)!r} kind={mesh.kind}\nvertex_id,x,y\n")
        for i, (x, y) in enumerate(mesh.vertices):
            fh.write(f"{i},{float(x)!r},{float(y)!r}\n")
    with open(paths[1], "w") as fh:
        fh.write("triangle_id,v0,v1,v2\n")
        for i, t in enumerate(mesh.triangles):
            fh.write(f"{i},{t[0]},{t[1]},{t[2]}\n")
    with open(paths[2], "w") as fh:
        fh.write("v0,v1,tag\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            fh.write(f"{a},{b},{tag}\n")
    return paths


def read_mesh(prefix: str) -> DomainMesh:
    with open(f"{prefix}_vertices.csv") as fh:
        meta = fh.readline().lstrip("# ").split()
        info = dict(kv.split("=") for kv in meta)
        fh.readline()
        V = np.array([[float(x) for x in line.split(",")[1:]] for line in fh if line.strip()])
    T = np.loadtxt(f"{prefix}_triangles.csv", delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)[:, 1:]
    with open(f"{prefix}_boundary.csv") as fh:
        fh.readline()
        rows = [line.strip().split(",") for line in fh if line.strip()]
    B = np.array([[int(a), int(b)] for a, b, _ in rows], dtype=np.int64)
    tags = np.array([t for _, _, t in rows])
    return DomainMesh(V, T, B, tags, float(info["h"]), info["kind"])
