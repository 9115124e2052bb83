"""The space A_Q(R^n) of unordered Q-tuples of points.

A Q-point is stored as a (Q, n) array in lexicographic order, so two
Q-points describing the same multiset are bitwise equal.  Distances use the
optimal-assignment metric

    G(S, T)^2 = min_sigma sum_i |s_i - t_sigma(i)|^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist, pdist


class DimensionMismatch(ValueError):
    pass


def _canonical(points):
    pts = np.array(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValueError("a Q-point needs Q >= 1 points in R^n with n >= 1")
    if not np.all(np.isfinite(pts)):
        raise ValueError("Q-point coordinates must be finite")
    # np.lexsort sorts by the last key first
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    pts.setflags(write=False)
    return pts


class QPoint:
    """An element of A_Q(R^n).

    ``QPoint([[0.0], [1.0]])`` is the two-point {0, 1} in R^1.  A 1-D input
    is read as Q points on the line.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        object.__setattr__(self, "points", _canonical(points))

    def __setattr__(self, name, value):
        raise AttributeError("QPoint is immutable")

    @classmethod
    def repeated(cls, p, Q: int) -> "QPoint":
        """Q copies of the single point p."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        return cls(np.tile(p, (Q, 1)))

    @property
    def Q(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def support(self) -> np.ndarray:
        """Distinct points, in canonical order."""
        return np.unique(self.points, axis=0)

    def canonicalize(self) -> "QPoint":
        return self

    def __eq__(self, other):
        if not isinstance(other, QPoint):
            return NotImplemented
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )

    def __hash__(self):
        return hash((self.points.shape, self.points.tobytes()))

    def __repr__(self):
        return f"QPoint({self.points.tolist()})"


def _check_same_shape(S: QPoint, T: QPoint):
    if S.Q != T.Q or S.n != T.n:
        raise DimensionMismatch(
            f"Q-points differ in shape: (Q={S.Q}, n={S.n}) vs (Q={T.Q}, n={T.n})"
        )


def matching(S: QPoint, T: QPoint) -> tuple[np.ndarray, float]:
    """Optimal assignment of the points of S to the points of T.

    Returns ``(sigma, cost)`` where ``S.points[i]`` is matched with
    ``T.points[sigma[i]]`` and ``cost`` is the summed squared distance.
    """
    _check_same_shape(S, T)
    C = cdist(S.points, T.points, "sqeuclidean")
    rows, cols = linear_sum_assignment(C)
    return cols, float(C[rows, cols].sum())


def metric(S: QPoint, T: QPoint) -> float:
    # fixed argument order so that metric(S, T) == metric(T, S) bitwise
    if S.points.tobytes() > T.points.tobytes():
        S, T = T, S
    return float(np.sqrt(matching(S, T)[1]))


def add(S: QPoint, T: QPoint) -> QPoint:
    if S.n != T.n:
        raise DimensionMismatch(f"cannot add Q-points in R^{S.n} and R^{T.n}")
    return QPoint(np.vstack([S.points, T.points]))


def translate(T: QPoint, s) -> QPoint:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (T.n,):
        raise DimensionMismatch(f"shift has shape {s.shape}, expected ({T.n},)")
    return QPoint(T.points + s)


def separation(T: QPoint) -> float:
    """Smallest distance between distinct support points (0 if there is one)."""
    spt = T.support()
    if len(spt) < 2:
        return 0.0
    return float(pdist(spt).min())


def diameter(T: QPoint) -> float:
    spt = T.support()
    if len(spt) < 2:
        return 0.0
    return float(pdist(spt).max())


@dataclass(frozen=True)
class QSplit:
    """Grouping of the points of T into clusters collapsed onto centers.

    ``groups[j]`` holds indices into ``T.points``; ``collapsed`` is the
    Q-point with ``len(groups[j])`` copies of ``centers[j]``.
    """

    T: QPoint
    groups: tuple
    centers: np.ndarray
    collapsed: QPoint
    beta: float

    @property
    def parts(self) -> list:
        return [QPoint(self.T.points[list(g)]) for g in self.groups]

    @property
    def distance(self) -> float:
        return metric(self.T, self.collapsed)

    @property
    def sep(self) -> float:
        return separation(self.collapsed)


def split_beta(epsilon: float, Q: int) -> float:
    return epsilon**Q * 3.0 ** (4 - Q * Q)


def _collapse(pts, groups):
    centers = []
    for g in groups:
        sub = pts[g]
        # medoid; argmin picks the lowest index among ties
        cost = cdist(sub, sub, "sqeuclidean").sum(axis=1)
        centers.append(sub[int(np.argmin(cost))])
    centers = np.array(centers)
    reps = np.repeat(centers, [len(g) for g in groups], axis=0)
    return centers, QPoint(reps)


def split(T: QPoint, epsilon: float) -> QSplit:
    """Collapse clusters of T so the result is well separated.

    Returns S with spt(S) in spt(T), G(T, S) < epsilon sep(S) and
    beta diam(spt T) < sep(S), beta = epsilon^Q 3^(4 - Q^2).  Clusters come
    from single-linkage merging in order of increasing gap (ties broken by
    the lowest index pair); the first merge level meeting both inequalities
    is returned.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    pts = T.points
    Q = T.Q
    beta = split_beta(epsilon, Q)
    diam = diameter(T)
    if diam == 0.0:
        groups = (tuple(range(Q)),)
        centers, S = _collapse(pts, [list(groups[0])])
        return QSplit(T, groups, centers, S, beta)

    # edges between distinct support points, sorted by (length, i, j)
    D = cdist(pts, pts)
    edges = sorted(
        (D[i, j], i, j) for i in range(Q) for j in range(i + 1, Q) if D[i, j] > 0
    )
    label = list(range(Q))
    for i in range(Q):
        for j in range(i):
            if D[i, j] == 0 and label[i] == i:
                label[i] = label[j]

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    def groups_now():
        roots = {}
        for i in range(Q):
            roots.setdefault(find(i), []).append(i)
        return sorted(roots.values())

    def accept(groups):
        centers, S = _collapse(pts, groups)
        sep = separation(S)
        return centers, S, sep > 0 and metric(T, S) < epsilon * sep and beta * diam < sep

    k = 0
    while True:
        groups = groups_now()
        centers, S, ok = accept(groups)
        if ok or len(groups) == 1:
            break
        # merge the next pair of distinct clusters
        while k < len(edges):
            _, i, j = edges[k]
            k += 1
            ri, rj = find(i), find(j)
            if ri != rj:
                label[max(ri, rj)] = min(ri, rj)
                break
    return QSplit(T, tuple(tuple(g) for g in groups), centers, S, beta)


def select_curve(samples: Sequence[QPoint]) -> np.ndarray:
    """Order the sheets of a sampled Q-valued curve.

    Returns an array v of shape (M, Q, n) such that v[k] is a reordering of
    samples[k].points and consecutive rows are optimally matched.
    """
    samples = list(samples)
    if not samples:
        return np.empty((0, 0, 0))
    Q, n = samples[0].Q, samples[0].n
    out = np.empty((len(samples), Q, n))
    out[0] = samples[0].points
    for k in range(1, len(samples)):
        T = samples[k]
        if T.Q != Q or T.n != n:
            raise DimensionMismatch("samples differ in Q or n")
        C = cdist(out[k - 1], T.points, "sqeuclidean")
        _, cols = linear_sum_assignment(C)
        out[k] = T.points[cols]
    return out


def clamp_retraction(T: QPoint, s: float, S: QPoint) -> QPoint:
    """Map S into the closed ball of radius s about T.

    Points inside the ball are fixed.  Otherwise each sheet of S slides along
    the segment to its optimal partner in T, all by the same factor, until
    the distance to T equals s.  Requires 4 s < sep(T).
    """
    if not (s > 0 and 4 * s < separation(T)):
        raise ValueError(
            f"retraction radius needs 0 < 4s < sep(T); got s={s}, sep={separation(T)}"
        )
    sigma, cost = matching(S, T)
    d = np.sqrt(cost)
    if d <= s:
        return S
    partner = T.points[sigma]
    return QPoint(partner + (s / d) * (S.points - partner))


def format_qpoint(T: QPoint) -> str:
    vals = " ".join(repr(float(v)) for v in T.points.ravel())
    return f"{T.Q} {T.n} {vals}"


def parse_qpoint(line: str) -> QPoint:
    tok = line.split()
    if len(tok) < 2:
        raise ValueError("Q-point line needs 'Q n v11 ... vQn'")
    Q, n = int(tok[0]), int(tok[1])
    vals = [float(t) for t in tok[2:]]
    if len(vals) != Q * n:
        raise ValueError(f"expected {Q * n} coordinates, got {len(vals)}")
    return QPoint(np.array(vals).reshape(Q, n))
