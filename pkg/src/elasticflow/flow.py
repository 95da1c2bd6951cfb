"""Elastic flow of closed polygons in R^2 and R^3.

The velocity is V = -2 nabla_s^2 kappa - |kappa|^2 kappa + lambda kappa with
nabla_s the normal part of the arclength derivative.  On a polygon

    kappa_i           = (t_i - t_{i-1}) / ds_i                  (vertices)
    (nabla_s kappa)_e = P_e (kappa_{i+1} - kappa_i) / h_e        (edges)
    (nabla_s^2 kappa)_i = P_i ((nabla kappa)_i - (nabla kappa)_{i-1}) / ds_i

where P_e, P_i project out the edge and vertex tangents.  This pairing makes
the discrete summation by parts sum <nabla^2 kappa, kappa> ds = -sum |nabla kappa|^2 h
exact, so the length-preserving multiplier can be cross-checked in two ways.

Time stepping is linearly implicit: the frozen-metric operator
2 d^4/ds^4 - lambda d^2/ds^2 on the uniform grid h = L/N is moved to the left,

    (I + dt M) X_new = X + dt (V(X) + M X),

and solved by FFT since M is circulant.  Steps that raise the monitored energy
beyond the slack, move points too far or approach a self-contact too quickly
are rejected and retried with half the step.
"""

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .curve import (
    DiscreteCurve,
    _candidate_pairs,
    _arc_separation,
    energies,
    min_self_distance,
    resample_uniform,
    rotation_number,
    save_curve,
    segment_distance,
    self_intersections,
)


class FlowError(RuntimeError):
    """A run had to be aborted; ``diagnostics`` says where."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class FlowConfig:
    lambda_mode: str = "fixed"  # "fixed" or "length_preserving"
    lam: float = 1.0
    dt_initial: float = None  # default 0.1 h^4
    dt_safety: float = 0.5
    dt_max: float = None  # default 0.05 (L/2pi)^4
    dt_growth: float = 1.25
    t_max: float = 100.0
    max_steps: int = 200000
    resample_every: int = 10
    resample_threshold: float = 1e-3
    n_points: int = 512
    prox_tol: float = None  # default 1e-4 L(0)
    angle_tol: float = 0.05
    local_sep: float = None
    energy_slack: float = 1e-6
    max_move: float = 0.5  # per step, in units of the mean spacing
    converge_tol: float = 1e-6
    converge_steps: int = 100
    length_drift: float = 5e-3
    stop_on_intersection: bool = True
    symmetry: object = None  # RigidMotion, paired with the index map i -> N/2 - i
    snapshot_every: int = 0
    min_distance_band: float = 0.01

    def __post_init__(self):
        if self.lambda_mode not in ("fixed", "length_preserving"):
            raise ValueError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.lambda_mode == "fixed" and not self.lam > 0:
            raise ValueError("fixed mode needs lam > 0")
        if self.dt_initial is not None and not self.dt_initial > 0:
            raise ValueError("dt_initial must be positive")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must lie in (0, 1]")
        if self.n_points < 64:
            raise ValueError("n_points must be at least 64")
        if self.symmetry is not None and self.n_points % 2:
            raise ValueError("symmetry enforcement needs an even n_points")

    def to_dict(self):
        d = dict(self.__dict__)
        if self.symmetry is not None:
            d["symmetry"] = {
                "matrix": np.asarray(self.symmetry.matrix).tolist(),
                "translation": np.asarray(self.symmetry.translation).tolist(),
            }
        return d


@dataclass
class FlowState:
    t: float
    curve: DiscreteCurve
    lambda_current: float
    dt: float
    L0: float
    steps: int = 0
    rejected: int = 0
    history: list = field(default_factory=list)
    events: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    calm_steps: int = 0
    max_velocity: float = float("inf")
    min_distance: float = float("inf")
    rotation: int = None
    finished: bool = False

    def event(self, kind):
        for ev in self.events:
            if ev["kind"] == kind:
                return ev
        return None


# ---------------------------------------------------------------------------
# discrete operators


def _frame(X):
    e = np.roll(X, -1, axis=0) - X
    h = np.linalg.norm(e, axis=1)
    t = e / h[:, None]
    ds = 0.5 * (h + np.roll(h, 1))
    kappa = (t - np.roll(t, 1, axis=0)) / ds[:, None]
    tau = t + np.roll(t, 1, axis=0)
    tau /= np.linalg.norm(tau, axis=1)[:, None]
    return h, t, ds, kappa, tau


def _project(v, u):
    return v - np.einsum("ij,ij->i", v, u)[:, None] * u


def _nabla_kappa(h, t, kappa):
    return _project((np.roll(kappa, -1, axis=0) - kappa) / h[:, None], t)


def _nabla2_kappa(h, t, ds, kappa, tau):
    nk = _nabla_kappa(h, t, kappa)
    return _project((nk - np.roll(nk, 1, axis=0)) / ds[:, None], tau), nk


def _points(c):
    if isinstance(c, DiscreteCurve):
        if not c.closed:
            raise FlowError("flow operators need a closed curve")
        return c.points
    return np.asarray(c, dtype=float)


def velocity(c, lam):
    """Discrete V = -2 nabla_s^2 kappa - |kappa|^2 kappa + lam kappa, normal to each vertex."""
    X = _points(c)
    h, t, ds, kappa, tau = _frame(X)
    if np.any(h <= 0):
        raise FlowError("degenerate segment in velocity")
    n2k, _ = _nabla2_kappa(h, t, ds, kappa, tau)
    k2 = np.einsum("ij,ij->i", kappa, kappa)
    # normal part only: tangential motion is handled by resampling
    return _project(-2.0 * n2k - k2[:, None] * kappa + lam * kappa, tau)


def lambda_numerators(c):
    """Numerator of the length multiplier, directly and after summation by parts."""
    X = _points(c)
    h, t, ds, kappa, tau = _frame(X)
    n2k, nk = _nabla2_kappa(h, t, ds, kappa, tau)
    k2 = np.einsum("ij,ij->i", kappa, kappa)
    quartic = np.sum(k2 * k2 * ds)
    direct = np.sum(2.0 * np.einsum("ij,ij->i", n2k, kappa) * ds) + quartic
    by_parts = -2.0 * np.sum(np.einsum("ij,ij->i", nk, nk) * h) + quartic
    return float(direct), float(by_parts), float(np.sum(k2 * ds))


def lambda_length_preserving(c):
    """lambda = sum <2 nabla^2 kappa + |kappa|^2 kappa, kappa> ds / sum |kappa|^2 ds."""
    num, _, den = lambda_numerators(c)
    if not den > 1e-300 or not np.isfinite(den):
        raise FlowError("length multiplier undefined: curve has no curvature")
    return num / den


# ---------------------------------------------------------------------------
# stepping


def _monitored(c, cfg, lam):
    en = energies(c, lam)
    return en.E_lambda if cfg.lambda_mode == "fixed" else en.Bbar


def _current_lambda(c, cfg):
    return cfg.lam if cfg.lambda_mode == "fixed" else lambda_length_preserving(c)


def _symmetrize(X, motion):
    N = len(X)
    idx = (N // 2 - np.arange(N)) % N
    return 0.5 * (X + motion.apply(X[idx]))


def _spacing_defect(X):
    h = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)
    return float(np.max(np.abs(h / h.mean() - 1.0)))


def _semi_implicit(X, V, lam_imp, dt):
    N = len(X)
    L = np.sum(np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1))
    hbar = L / N
    s = np.sin(np.pi * np.arange(N) / N)
    sym = 32.0 * s ** 4 / hbar ** 4 + 4.0 * max(lam_imp, 0.0) * s ** 2 / hbar ** 2
    dX = np.fft.ifft(np.fft.fft(dt * V, axis=0) / (1.0 + dt * sym)[:, None], axis=0).real
    return X + dX, dX


def _passages(X_old, X_new, closed, pad, local_sep):
    """Segment pairs of a space curve that passed through each other during a step."""
    p0o, p1o = X_old, np.roll(X_old, -1, axis=0)
    p0n, p1n = X_new, np.roll(X_new, -1, axis=0)
    lo = np.minimum(np.minimum(p0o, p1o), np.minimum(p0n, p1n))
    hi = np.maximum(np.maximum(p0o, p1o), np.maximum(p0n, p1n))
    i, j = _candidate_pairs(lo, hi, pad)
    h = np.linalg.norm(p1n - p0n, axis=1)
    sep = _arc_separation(i, j, h, closed)
    keep = sep > local_sep
    i, j = i[keep], j[keep]
    if len(i) == 0:
        return []

    # linear motion in between; the triple product is a cubic in the step fraction
    taus = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])

    def at(tau, ii=i, jj=j):
        a0 = p0o[ii] + tau * (p0n[ii] - p0o[ii])
        a1 = p1o[ii] + tau * (p1n[ii] - p1o[ii])
        b0 = p0o[jj] + tau * (p0n[jj] - p0o[jj])
        b1 = p1o[jj] + tau * (p1n[jj] - p1o[jj])
        return a0, a1, b0, b1

    def vol(tau):
        a0, a1, b0, b1 = at(tau)
        return np.einsum("ij,ij->i", np.cross(a1 - a0, b1 - b0), b0 - a0)

    vals = np.array([vol(tau) for tau in taus])
    coef = np.linalg.solve(np.vander(taus, 4), vals)
    scale = np.mean(h) ** 3
    maybe = np.any(np.sign(vals[1:]) != np.sign(vals[:-1]), axis=0) | np.any(np.abs(vals) <= 1e-12 * scale, axis=0)
    hits = []
    for k in np.flatnonzero(maybe):
        roots = np.roots(coef[:, k]) if np.any(coef[:, k]) else np.array([])
        roots = roots[np.abs(roots.imag) < 1e-9].real
        for tau in roots[(roots >= 0.0) & (roots <= 1.0)]:
            d, _, _ = segment_distance(*at(tau, i[k : k + 1], j[k : k + 1]))
            if d[0] <= 1e-6 * np.mean(h):
                hits.append((int(i[k]), int(j[k])))
                break
    return hits


def initial_state(curve, cfg):
    """Resample to ``cfg.n_points`` equal chords and set up a state at t = 0."""
    if not curve.closed:
        raise FlowError("the flow needs a closed curve")
    c = curve
    if c.n_points != cfg.n_points or _spacing_defect(c.points) > cfg.resample_threshold:
        c = resample_uniform(c, cfg.n_points, kind="cubic")
    if cfg.symmetry is not None:
        c = c.with_points(_symmetrize(c.points, cfg.symmetry))
    en = energies(c)
    h = en.L / c.n_points
    dt = cfg.dt_initial if cfg.dt_initial is not None else 0.1 * h ** 4
    lam = _current_lambda(c, cfg)
    st = FlowState(t=0.0, curve=c, lambda_current=lam, dt=dt, L0=en.L)
    if c.dim == 2:
        st.rotation = rotation_number(c)[1]
    _log(st, cfg)
    _check_intersections(st, cfg, None)
    if cfg.snapshot_every:
        st.snapshots.append((0.0, c))
    return st


def _log(st, cfg):
    c = st.curve
    en = energies(c, st.lambda_current)
    band = cfg.min_distance_band * en.L
    st.min_distance = min_self_distance(c, band)
    st.history.append((st.t, en.L, en.B, en.Bbar, en.E_lambda, st.lambda_current, st.min_distance))


def _prox(st, cfg):
    return cfg.prox_tol if cfg.prox_tol is not None else 1e-4 * st.L0


def _check_intersections(st, cfg, X_prev):
    prox = _prox(st, cfg)
    rep = self_intersections(st.curve, prox, cfg.angle_tol, cfg.local_sep)
    passed = []
    if X_prev is not None and st.curve.dim == 3:
        local = cfg.local_sep if cfg.local_sep is not None else 10.0 * prox
        passed = _passages(X_prev, st.curve.points, True, prox, local)
    if (not rep.embedded or passed) and st.event("first_self_intersection") is None:
        st.events.append(
            {
                "kind": "first_self_intersection",
                "time": st.t,
                "step": st.steps,
                "count": max(rep.count, 1 if passed else 0),
                "report": rep.to_dict(),
                "passages": passed,
            }
        )
        if cfg.stop_on_intersection:
            st.finished = True
    return rep


def step(st, cfg):
    """Advance by one accepted step (retrying with smaller dt on rejection)."""
    X = st.curve.points
    N = len(X)
    E_old = _monitored(st.curve, cfg, st.lambda_current)
    lam = st.lambda_current
    V = velocity(X, lam)
    hbar = np.sum(np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)) / N
    move_cap = cfg.max_move * hbar
    if np.isfinite(st.min_distance):
        move_cap = min(move_cap, max(0.25 * st.min_distance, 1e-3 * hbar))
    dt = st.dt
    dt_floor = 1e-14 * hbar ** 4
    while True:
        if dt < dt_floor:
            raise FlowError(
                "step size underflow",
                {"t": st.t, "step": st.steps, "dt": dt, "max_velocity": float(np.max(np.linalg.norm(V, axis=1)))},
            )
        X_new, dX = _semi_implicit(X, V, lam if cfg.lambda_mode == "fixed" else max(lam, 0.0), dt)
        if not np.all(np.isfinite(X_new)):
            dt *= 0.5
            st.rejected += 1
            continue
        if np.max(np.linalg.norm(dX, axis=1)) > move_cap:
            dt *= 0.5
            st.rejected += 1
            continue
        if cfg.symmetry is not None:
            X_new = _symmetrize(X_new, cfg.symmetry)
        try:
            c_new = st.curve.with_points(X_new)
        except ValueError:
            dt *= 0.5
            st.rejected += 1
            continue
        E_new = _monitored(c_new, cfg, lam)
        if E_new > E_old + cfg.energy_slack * abs(E_old) * cfg.dt_safety:
            dt *= 0.5
            st.rejected += 1
            continue
        break
    move = float(np.max(np.linalg.norm(dX, axis=1)))

    st.steps += 1
    st.t += dt
    X_prev = X
    due = st.steps % cfg.resample_every == 0
    if cfg.lambda_mode == "length_preserving":
        L_new = np.sum(np.linalg.norm(np.roll(X_new, -1, axis=0) - X_new, axis=1))
        # fast transients can drift within one resample period
        due = due or abs(L_new - st.L0) > 0.5 * cfg.length_drift * st.L0
    if due:
        c_new = _maybe_resample(c_new, st, cfg, E_new, lam)
    st.curve = c_new
    st.lambda_current = _current_lambda(c_new, cfg)
    _log(st, cfg)
    # grow, but aim below the displacement cap so the next try is likely accepted
    st.dt = dt * min(cfg.dt_growth, 0.8 * move_cap / move if move > 0 else cfg.dt_growth)
    st.dt = max(st.dt, dt * 0.5)
    dt_max = cfg.dt_max if cfg.dt_max is not None else 0.05 * (st.history[-1][1] / (2 * np.pi)) ** 4
    st.dt = min(st.dt, dt_max)
    if st.rotation is not None:
        rot = rotation_number(c_new)[1]
        if rot != st.rotation:
            raise FlowError("rotation number changed", {"t": st.t, "step": st.steps, "from": st.rotation, "to": rot})
    if cfg.lambda_mode == "length_preserving":
        drift = abs(st.history[-1][1] - st.L0) / st.L0
        if drift > cfg.length_drift:
            raise FlowError("length drift exceeded", {"t": st.t, "step": st.steps, "drift": drift})
    _check_intersections(st, cfg, X_prev)

    Vn = velocity(c_new, st.lambda_current)
    L = st.history[-1][1]
    vref = (2.0 * np.pi / L) ** 3
    st.max_velocity = float(np.max(np.linalg.norm(Vn, axis=1)))
    st.calm_steps = st.calm_steps + 1 if st.max_velocity < cfg.converge_tol * vref else 0
    if st.calm_steps >= cfg.converge_steps and st.event("converged") is None:
        st.events.append({"kind": "converged", "time": st.t, "step": st.steps, "max_velocity": st.max_velocity})
        st.finished = True
    if cfg.snapshot_every and st.steps % cfg.snapshot_every == 0:
        st.snapshots.append((st.t, c_new))
    return st


def _maybe_resample(c, st, cfg, E_ref, lam):
    X = c.points
    rescale = cfg.lambda_mode == "length_preserving"
    L = np.sum(np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1))
    need_len = rescale and abs(L - st.L0) > 1e-12 * st.L0
    uneven = _spacing_defect(X) > cfg.resample_threshold
    if not (uneven or need_len):
        return c

    def finish(c2):
        if need_len:
            cen = c2.points.mean(axis=0)
            c2 = c2.with_points(cen + (st.L0 / energies(c2).L) * (c2.points - cen))
        if cfg.symmetry is not None:
            c2 = c2.with_points(_symmetrize(c2.points, cfg.symmetry))
        return c2

    limit = E_ref + cfg.energy_slack * abs(E_ref) * cfg.dt_safety
    candidates = [resample_uniform(c, len(X), kind="cubic")] if uneven else []
    if need_len:
        # Bbar is scale invariant, so a bare rescale is always admissible
        candidates.append(c)
    for c2 in candidates:
        c2 = finish(c2)
        if _monitored(c2, cfg, lam) <= limit:
            return c2
    return c


def run(initial, cfg, callback=None):
    """Integrate until t_max, convergence, max_steps or (optionally) a self-intersection."""
    st = initial_state(initial, cfg)
    t0 = time.perf_counter()
    while not st.finished:
        if st.t >= cfg.t_max:
            st.events.append({"kind": "t_max", "time": st.t, "step": st.steps})
            break
        if st.steps >= cfg.max_steps:
            st.events.append({"kind": "max_steps", "time": st.t, "step": st.steps})
            break
        step(st, cfg)
        if callback is not None:
            callback(st)
    st.wall_time = time.perf_counter() - t0
    return st


# ---------------------------------------------------------------------------
# output

HISTORY_COLUMNS = ("t", "L", "B", "Bbar", "E_lambda", "lambda", "min_self_distance")


def write_history_csv(st, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_COLUMNS)
        for row in st.history:
            w.writerow([repr(float(v)) for v in row])


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_events_json(st, path, extra=None):
    doc = {
        "events": st.events,
        "steps": st.steps,
        "rejected": st.rejected,
        "t": st.t,
        "final": dict(zip(HISTORY_COLUMNS, st.history[-1])),
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)


def write_snapshots(st, directory, stem="snapshot"):
    paths = []
    for k, (t, c) in enumerate(st.snapshots):
        p = os.path.join(directory, f"{stem}_{k:04d}.json")
        save_curve(c.with_points(c.points, t=t), p)
        paths.append(p)
    return paths


def energy_monotone(st, mode, slack=1e-6):
    """Largest relative per-step increase of the monitored energy and whether it is within slack."""
    col = 4 if mode == "fixed" else 3
    e = np.array([row[col] for row in st.history])
    if len(e) < 2:
        return 0.0, True
    inc = np.max((e[1:] - e[:-1]) / np.abs(e[:-1]))
    return float(inc), bool(inc <= slack)
