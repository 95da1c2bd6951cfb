"""Discrete closed curves: energies, curvature, rotation number, self-intersections.

A curve is an ordered point list in R^2 or R^3.  Closed curves carry an implicit
segment from the last point back to the first.  Discrete curvature at vertex i
is the difference of unit edge tangents divided by the dual length

    kappa_i = (t_i - t_{i-1}) / ds_i,    ds_i = (h_{i-1} + h_i) / 2,

which is the centered second difference with the nonuniform-spacing correction.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

MIN_POINTS = 8


class DegenerateCurveError(ValueError):
    """Too few points, non-finite coordinates or a zero-length segment."""


@dataclass(frozen=True)
class DiscreteCurve:
    points: np.ndarray
    closed: bool = True
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise DegenerateCurveError(f"points must have shape (N, 2) or (N, 3), got {pts.shape}")
        if pts.shape[0] < MIN_POINTS:
            raise DegenerateCurveError(f"need at least {MIN_POINTS} points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise DegenerateCurveError("non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        h = segment_lengths(self)
        if np.any(h <= 0.0):
            raise DegenerateCurveError(f"zero-length segment at index {int(np.argmin(h))}")

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def with_points(self, points, **meta):
        md = dict(self.metadata)
        md.update(meta)
        return DiscreteCurve(points, self.closed, md)

    def scaled(self, s, center=None):
        c = self.points.mean(axis=0) if center is None else np.asarray(center, float)
        return self.with_points(c + s * (self.points - c))


def _next(points, closed):
    if closed:
        return np.roll(points, -1, axis=0)
    return points[1:]


def segment_vectors(c):
    p = c.points
    if c.closed:
        return np.roll(p, -1, axis=0) - p
    return p[1:] - p[:-1]


def segment_lengths(c):
    return np.linalg.norm(segment_vectors(c), axis=1)


def length(c):
    return float(segment_lengths(c).sum())


def arclength_elements(c):
    """Dual lengths ds_i: half the sum of the two segments meeting at vertex i."""
    h = segment_lengths(c)
    if c.closed:
        return 0.5 * (h + np.roll(h, 1))
    ds = np.empty(c.n_points)
    ds[1:-1] = 0.5 * (h[1:] + h[:-1])
    ds[0] = 0.5 * h[0]
    ds[-1] = 0.5 * h[-1]
    return ds


def unit_tangents(c):
    """Unit edge tangents t_i of segment i."""
    e = segment_vectors(c)
    return e / np.linalg.norm(e, axis=1)[:, None]


def vertex_tangents(c):
    """Unit tangent at each vertex, bisecting the adjacent edge tangents."""
    t = unit_tangents(c)
    if c.closed:
        tau = t + np.roll(t, 1, axis=0)
    else:
        tau = np.empty((c.n_points, c.dim))
        tau[1:-1] = t[1:] + t[:-1]
        tau[0] = t[0]
        tau[-1] = t[-1]
    nrm = np.linalg.norm(tau, axis=1)
    # a reversal (cusp at a vertex) has no bisector; fall back to the outgoing edge
    bad = nrm < 1e-14
    if np.any(bad):
        idx = np.flatnonzero(bad)
        tau[idx] = t[np.minimum(idx, len(t) - 1)]
        nrm[idx] = 1.0
    return tau / nrm[:, None]


def curvature_vector(c):
    """Discrete curvature vector per vertex; endpoints of open curves are NaN."""
    t = unit_tangents(c)
    ds = arclength_elements(c)
    if c.closed:
        return (t - np.roll(t, 1, axis=0)) / ds[:, None]
    k = np.full((c.n_points, c.dim), np.nan)
    k[1:-1] = (t[1:] - t[:-1]) / ds[1:-1, None]
    return k


def signed_curvature(c):
    """Signed curvature of a planar curve, positive for counterclockwise turning."""
    if c.dim != 2:
        raise ValueError("signed curvature needs a planar curve")
    kv = curvature_vector(c)
    tau = vertex_tangents(c)
    return tau[:, 0] * kv[:, 1] - tau[:, 1] * kv[:, 0]


@dataclass(frozen=True)
class EnergyReport:
    L: float
    B: float
    Bbar: float
    lam: float
    E_lambda: float


def energies(c, lam=0.0):
    """Length, bending energy, normalized energy L*B and E_lambda = B + lam*L."""
    if not c.closed:
        raise ValueError("energies are defined for closed curves")
    kv = curvature_vector(c)
    ds = arclength_elements(c)
    L = float(ds.sum())
    B = float(np.sum(np.einsum("ij,ij->i", kv, kv) * ds))
    return EnergyReport(L=L, B=B, Bbar=L * B, lam=float(lam), E_lambda=B + lam * L)


def rotation_number(c):
    """Absolute rotation number of a closed planar polygon.

    Returns ``(raw, integer)`` where raw is |sum of exterior angles| / 2 pi.
    """
    if c.dim != 2:
        raise ValueError("rotation number needs a planar curve")
    if not c.closed:
        raise ValueError("rotation number needs a closed curve")
    t = unit_tangents(c)
    tp = np.roll(t, 1, axis=0)
    turn = np.arctan2(tp[:, 0] * t[:, 1] - tp[:, 1] * t[:, 0], np.einsum("ij,ij->i", tp, t))
    raw = abs(turn.sum()) / (2.0 * np.pi)
    return float(raw), int(round(raw))


# ---------------------------------------------------------------------------
# resampling


def _equal_chord_params(evaluate, total, n, start=0.0, tol=1e-14, max_iter=60):
    """Parameters sigma_k (k < n) on a closed parametrized loop with equal chords."""
    gaps = np.full(n, total / n)
    for _ in range(max_iter):
        sig = start + np.concatenate(([0.0], np.cumsum(gaps[:-1])))
        pts = evaluate(sig)
        chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        rel = chords / chords.mean() - 1.0
        if np.max(np.abs(rel)) < tol:
            break
        gaps = gaps / (1.0 + rel)
        gaps *= total / gaps.sum()
    return sig, pts


def resample_uniform(c, n, kind="linear"):
    """Resample to ``n`` points with equal spacing, keeping the first point.

    ``kind="linear"`` places the points on the polygon itself, ``kind="cubic"``
    on the periodic cubic spline through the vertices (closed curves only).
    Spacing is equal in chord length, which makes the operation idempotent.
    """
    if n < MIN_POINTS:
        raise DegenerateCurveError(f"need at least {MIN_POINTS} points, got {n}")
    p = c.points
    h = segment_lengths(c)
    if c.closed:
        q = np.vstack([p, p[:1]])
    else:
        q = p
    s = np.concatenate(([0.0], np.cumsum(h)))
    total = s[-1]
    if kind == "linear":
        def evaluate(sig):
            sig = np.mod(sig, total) if c.closed else sig
            return np.column_stack([np.interp(sig, s, q[:, j]) for j in range(c.dim)])
    elif kind == "cubic":
        if not c.closed:
            raise ValueError("cubic resampling needs a closed curve")
        spline = CubicSpline(s, q, bc_type="periodic")

        def evaluate(sig):
            return spline(np.mod(sig, total))
    else:
        raise ValueError(f"unknown resampling kind {kind!r}")
    if c.closed:
        _, pts = _equal_chord_params(evaluate, total, n)
    else:
        pts = evaluate(np.linspace(0.0, total, n))
    pts[0] = p[0]
    return c.with_points(pts)


# ---------------------------------------------------------------------------
# self-intersections


@dataclass(frozen=True)
class Contact:
    """One cluster of segment contacts, i.e. one point of the self-intersection set."""

    point: np.ndarray
    params: tuple
    tangents: tuple
    tangential: bool
    multiplicity: int
    distance: float
    n_records: int


@dataclass(frozen=True)
class IntersectionReport:
    contacts: list
    records: np.ndarray  # structured rows (i, j, s, t, dist, sin_angle)
    prox_tol: float
    angle_tol: float

    @property
    def count(self):
        return len(self.contacts)

    @property
    def embedded(self):
        return len(self.contacts) == 0

    def pairs(self):
        return {(int(r[0]), int(r[1])) for r in self.records}

    def to_dict(self):
        return {
            "count": self.count,
            "prox_tol": self.prox_tol,
            "angle_tol": self.angle_tol,
            "contacts": [
                {
                    "point": [float(v) for v in ct.point],
                    "params": [float(v) for v in ct.params],
                    "tangential": bool(ct.tangential),
                    "multiplicity": int(ct.multiplicity),
                    "distance": float(ct.distance),
                }
                for ct in self.contacts
            ],
        }


def default_prox_tol(c):
    return 1e-4 * length(c)


def _segments(c):
    p0 = c.points
    p1 = _next(p0, c.closed)
    if not c.closed:
        p0 = p0[:-1]
    return p0, p1


def _candidate_pairs(p0, p1, pad):
    """Sort-and-sweep broadphase on the first axis, then box overlap on the rest."""
    lo = np.minimum(p0, p1) - pad
    hi = np.maximum(p0, p1) + pad
    order = np.argsort(lo[:, 0], kind="stable")
    lo_s = lo[order, 0]
    hi_s = hi[order, 0]
    end = np.searchsorted(lo_s, hi_s, side="right")
    k = np.arange(len(order))
    counts = np.maximum(end - k - 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, int), np.empty(0, int)
    a = np.repeat(k, counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    b = a + 1 + offs
    i, j = order[a], order[b]
    keep = np.all((lo[i] <= hi[j]) & (lo[j] <= hi[i]), axis=1)
    i, j = i[keep], j[keep]
    return np.minimum(i, j), np.maximum(i, j)


def _arc_separation(i, j, h, closed):
    """Arclength strictly between segments i < j along the shorter way."""
    s = np.concatenate(([0.0], np.cumsum(h)))
    fwd = s[j] - s[i + 1]
    if not closed:
        return fwd
    back = s[-1] - s[j + 1] + s[i]
    return np.minimum(fwd, back)


def segment_distance(a0, a1, b0, b1):
    """Closest points between segment batches; returns (dist, s, t)."""
    d1 = a1 - a0
    d2 = b1 - b0
    r = a0 - b0
    A = np.einsum("ij,ij->i", d1, d1)
    E = np.einsum("ij,ij->i", d2, d2)
    F = np.einsum("ij,ij->i", d2, r)
    C = np.einsum("ij,ij->i", d1, r)
    Bd = np.einsum("ij,ij->i", d1, d2)
    den = A * E - Bd * Bd
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(den > 1e-14 * A * E, np.clip((Bd * F - C * E) / den, 0.0, 1.0), 0.0)
        t = (Bd * s + F) / E
        s = np.where(t < 0.0, np.clip(-C / A, 0.0, 1.0), np.where(t > 1.0, np.clip((Bd - C) / A, 0.0, 1.0), s))
        t = np.clip(t, 0.0, 1.0)
    ca = a0 + s[:, None] * d1
    cb = b0 + t[:, None] * d2
    return np.linalg.norm(ca - cb, axis=1), s, t


def _orient(a, b, c):
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _sin_between(u, v):
    if u.shape[1] == 2:
        return np.abs(u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])
    return np.linalg.norm(np.cross(u, v), axis=1)


def contact_records(c, prox_tol, local_sep=None):
    """All non-local segment pairs that cross or come within ``prox_tol``.

    Returns arrays (i, j, s, t, dist).  Pairs are non-local when they share no
    vertex and the arclength strictly between them exceeds ``local_sep``
    (default ``10 * prox_tol``).
    """
    if local_sep is None:
        local_sep = 10.0 * prox_tol
    p0, p1 = _segments(c)
    h = np.linalg.norm(p1 - p0, axis=1)
    i, j = _candidate_pairs(p0, p1, 0.5 * prox_tol)
    sep = _arc_separation(i, j, h, c.closed)
    keep = sep > local_sep
    i, j = i[keep], j[keep]
    dist, s, t = segment_distance(p0[i], p1[i], p0[j], p1[j])
    if c.dim == 2:
        o1 = _orient(p0[i], p1[i], p0[j])
        o2 = _orient(p0[i], p1[i], p1[j])
        o3 = _orient(p0[j], p1[j], p0[i])
        o4 = _orient(p0[j], p1[j], p1[i])
        proper = (o1 * o2 < 0.0) & (o3 * o4 < 0.0)
        dist = np.where(proper, 0.0, dist)
    hit = dist <= prox_tol
    return i[hit], j[hit], s[hit], t[hit], dist[hit]


def _cluster(i, j, pts, link_radius, n_seg, closed):
    """Connected components linking records by proximity or index adjacency."""
    R = len(i)
    parent = np.arange(R)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    if R > 1 and link_radius > 0:
        from scipy.spatial import cKDTree

        for a, b in cKDTree(pts).query_pairs(link_radius):
            union(a, b)
    index = {(int(a), int(b)): r for r, (a, b) in enumerate(zip(i, j))}
    for r in range(R):
        for di in (-2, -1, 0, 1, 2):
            for dj in (-2, -1, 0, 1, 2):
                a, b = int(i[r]) + di, int(j[r]) + dj
                if closed:
                    a, b = a % n_seg, b % n_seg
                key = (min(a, b), max(a, b))
                q = index.get(key)
                if q is not None:
                    union(r, q)
    roots = np.array([find(r) for r in range(R)], dtype=int)
    return roots


def _count_runs(idx, n_seg, closed, gap=2):
    idx = np.unique(idx)
    if len(idx) == 0:
        return 0
    d = np.diff(idx)
    runs = 1 + int(np.sum(d > gap))
    if closed and runs > 1 and (idx[0] + n_seg - idx[-1]) <= gap:
        runs -= 1
    return runs


def self_intersections(c, prox_tol=None, angle_tol=0.05, local_sep=None):
    """Detect and cluster self-intersections of a discrete curve.

    A contact is a pair of non-local segments that cross exactly or come within
    ``prox_tol`` (default 1e-4 times the length).  Contacts are grouped into
    points by single linkage with radius ``2 * prox_tol`` together with index
    adjacency, and a point is tangential when the interpolated tangents of some
    contributing pair satisfy |sin angle| < sin(angle_tol).
    """
    if prox_tol is None:
        prox_tol = default_prox_tol(c)
    i, j, s, t, dist = contact_records(c, prox_tol, local_sep)
    p0, p1 = _segments(c)
    n_seg = len(p0)
    tau = vertex_tangents(c)
    tau_next = tau[(np.arange(n_seg) + 1) % c.n_points]
    T1 = (1 - s)[:, None] * tau[i] + s[:, None] * tau_next[i]
    T2 = (1 - t)[:, None] * tau[j] + t[:, None] * tau_next[j]
    T1 /= np.linalg.norm(T1, axis=1)[:, None]
    T2 /= np.linalg.norm(T2, axis=1)[:, None]
    sin_ang = _sin_between(T1, T2)
    pa = p0[i] + s[:, None] * (p1[i] - p0[i])
    pb = p0[j] + t[:, None] * (p1[j] - p0[j])
    mid = 0.5 * (pa + pb)
    records = np.column_stack([i, j, s, t, dist, sin_ang]) if len(i) else np.empty((0, 6))
    contacts = []
    if len(i):
        roots = _cluster(i, j, mid, 2.0 * prox_tol, n_seg, c.closed)
        for root in np.unique(roots):
            mem = np.flatnonzero(roots == root)
            best = mem[np.lexsort((sin_ang[mem], dist[mem]))[0]]
            runs = _count_runs(np.concatenate([i[mem], j[mem]]), n_seg, c.closed)
            contacts.append(
                Contact(
                    point=mid[best],
                    params=(float(i[best] + s[best]), float(j[best] + t[best])),
                    tangents=(T1[best], T2[best]),
                    tangential=bool(np.min(sin_ang[mem]) < np.sin(angle_tol)),
                    multiplicity=max(2, runs),
                    distance=float(dist[best]),
                    n_records=len(mem),
                )
            )
        contacts.sort(key=lambda ct: ct.params)
    return IntersectionReport(contacts=contacts, records=records, prox_tol=float(prox_tol), angle_tol=float(angle_tol))


def min_self_distance(c, band=None):
    """Smallest distance between two parts of the curve that bend back on each other.

    Only pairs whose distance is below half their separation along the curve
    count, so neighbouring segments of a smooth arc are ignored.  Returns
    ``inf`` when nothing lies within ``band`` (default 5% of the length).
    """
    p0, p1 = _segments(c)
    h = np.linalg.norm(p1 - p0, axis=1)
    if band is None:
        band = 0.05 * h.sum()
    i, j = _candidate_pairs(p0, p1, 0.5 * band)
    sep = _arc_separation(i, j, h, c.closed)
    keep = sep > 0.0
    i, j, sep = i[keep], j[keep], sep[keep]
    if len(i) == 0:
        return float("inf")
    dist, _, _ = segment_distance(p0[i], p1[i], p0[j], p1[j])
    if c.dim == 2:
        proper = (_orient(p0[i], p1[i], p0[j]) * _orient(p0[i], p1[i], p1[j]) < 0) & (
            _orient(p0[j], p1[j], p0[i]) * _orient(p0[j], p1[j], p1[i]) < 0
        )
        dist = np.where(proper, 0.0, dist)
    ok = (dist < 0.5 * sep) & (dist <= band)
    return float(dist[ok].min()) if np.any(ok) else float("inf")


# ---------------------------------------------------------------------------
# file format


def _fmt(x):
    return format(float(x), ".17g")


def to_json(c):
    pts = ",\n    ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in c.points)
    head = json.dumps({"dimension": c.dim, "closed": bool(c.closed)})[:-1]
    meta = json.dumps(_jsonable(c.metadata), sort_keys=True)
    return head + ',\n  "points": [\n    ' + pts + '\n  ],\n  "metadata": ' + meta + "\n}\n"


def from_json(text):
    doc = json.loads(text)
    pts = np.asarray(doc["points"], dtype=float)
    if pts.shape[1] != int(doc["dimension"]):
        raise ValueError("dimension field does not match point coordinates")
    return DiscreteCurve(pts, bool(doc.get("closed", True)), dict(doc.get("metadata", {})))


def save_curve(c, path):
    with open(path, "w") as fh:
        fh.write(to_json(c))


def load_curve(path):
    with open(path) as fh:
        return from_json(fh.read())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
