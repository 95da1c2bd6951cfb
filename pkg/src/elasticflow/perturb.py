"""Initial data for the embeddedness-breaking experiments.

Two families are built here.  The planar one starts from the elastic
two-teardrop, moved so that its tangential contact sits at the origin with
tangents +-e1, and replaces the two touching sheets by the graphs +-w_alpha
with

    w_alpha(x) = (1 - psi(x/rho)) v(x) + rho^2 psi(x/rho) (x^4 + alpha),

v being the upper sheet.  The spatial one lifts the figure-eight into R^3 and
separates its two branches at the crossing by +-rho^2 psi u_alpha along e3,
damping the in-plane graph components at the same time.

The module also holds a small corpus of embedded ovals used for the
preservation runs.
"""

from dataclasses import dataclass

import numpy as np

from . import elastica as ela
from .curve import DiscreteCurve, energies, resample_uniform, self_intersections


class MarginError(ValueError):
    """The energy margin cannot be met at the requested resolution."""


@dataclass
class PerturbParams:
    alpha: float = 0.0
    rho: float = None  # None: shrink from 0.05 L until the margin holds
    epsilon: float = 0.5
    n_points: int = 512
    scale: float = 1.0  # size of the base curve (spatial family)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.n_points < 64 or self.n_points % 2:
            raise ValueError("n_points must be even and at least 64")


# ---------------------------------------------------------------------------
# scalar building blocks


def bump_u(alpha, x):
    """u_alpha(x) = x^4 + alpha."""
    return np.asarray(x, dtype=float) ** 4 + alpha


# 96 nodes resolve the step to rounding; fewer leave ~1e-10 ripples that fourth
# differences on fine grids amplify
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)


def _mollifier(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def _smooth_step(t):
    """Normalised integral of the mollifier from -1 to t, clipped to [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    half = 0.5 * (t + 1.0)
    # Gauss-Legendre on [-1, t] for every t at once
    nodes = -1.0 + half[..., None] * (_GL_NODES + 1.0)
    vals = half * np.sum(_GL_WEIGHTS * _mollifier(nodes), axis=-1)
    return vals / _STEP_NORM


_STEP_NORM = float(np.sum(_GL_WEIGHTS * _mollifier(_GL_NODES)))


def cutoff_psi(x):
    """Smooth even cutoff: 1 on [-1/2, 1/2], 0 outside (-1, 1)."""
    x0 = x
    val = _smooth_step(3.0 - 4.0 * np.abs(np.asarray(x, dtype=float)))
    return float(val) if np.ndim(x0) == 0 else val


def blend_w(alpha, rho, v, x, rho0=None):
    """(1 - psi(x/rho)) v(x) + rho^2 psi(x/rho) u_alpha(x)."""
    if not rho > 0 or (rho0 is not None and rho >= rho0):
        raise ValueError(f"rho must lie in (0, {rho0}), got {rho}")
    x = np.asarray(x, dtype=float)
    p = cutoff_psi(x / rho)
    return (1.0 - p) * v(x) + rho * rho * p * bump_u(alpha, x)


# ---------------------------------------------------------------------------
# the normalised two-teardrop


def _two_teardrop_frame():
    T = ela.gammaT()
    b = T.domain[1]
    p = T.point(b)
    J = np.array([[0.0, -1.0], [-1.0, 0.0]])
    return T, b, p, J


def sheet_v(u):
    """Upper sheet of the normalised two-teardrop near the contact, as a graph over e1."""
    m = ela.solve_mT()
    _, b, _, _ = _two_teardrop_frame()
    c = np.cos(b) + np.abs(np.asarray(u, dtype=float)) / (2.0 * np.sqrt(m))
    return ela.G(np.arccos(np.clip(c, -1.0, 1.0)), m)


def sheet_radius():
    """Half-width rho_0 of the interval on which the sheet is a graph."""
    # the graph ends where the teardrop tangent turns vertical again, i.e. at x = 0
    m = ela.solve_mT()
    _, b, _, _ = _two_teardrop_frame()
    return float(2.0 * np.sqrt(m) * (1.0 - np.cos(b)))


def two_teardrop_star(n):
    """The two-teardrop on T^1 = [0, 1), contact at the origin for t = 0 and t = 1/2.

    Sampled at t_i = i/n, so the reflection symmetry maps index i to n/2 - i.
    Returns the points and the parameter values.
    """
    T, b, p, J = _two_teardrop_frame()
    g = ela.gamma2T()
    t = np.arange(n) / n
    x = np.where(t < 0.5, 4.0 * b * t, 4.0 * b * (t - 1.0))
    X = (g.point(x) - p) @ J.T
    return X, t


def _sheet_mask(t, X, rho, centre):
    # points on the branch through the contact at parameter `centre` with |u| < rho
    d = np.abs((t - centre + 0.5) % 1.0 - 0.5)
    return (d < 0.25) & (np.abs(X[:, 0]) < rho)


def _planar_points(alpha, rho, n):
    X, t = two_teardrop_star(n)
    rho0 = sheet_radius()
    up = _sheet_mask(t, X, rho, 0.0)
    lo = _sheet_mask(t, X, rho, 0.5)
    X = X.copy()
    X[up, 1] = blend_w(alpha, rho, sheet_v, X[up, 0], rho0)
    X[lo, 1] = -blend_w(alpha, rho, sheet_v, X[lo, 0], rho0)
    return X


def _too_coarse(rho, L, n):
    # the blend ramps over rho/4; ask for a few points there
    return rho / 4.0 < 4.0 * L / n


def eta_planar(params, sample_n=None):
    """Planar family eta_alpha built on the two-teardrop.

    With ``params.rho`` unset, rho starts at 0.05 L and is halved until
    Bbar <= C_2T + epsilon; ``MarginError`` is raised once the blend can no
    longer be resolved by ``n_points``.  An explicit rho is used as given and
    the margin is only reported in the metadata.
    """
    n = params.n_points
    sample_n = sample_n or n
    C2T = ela.constant_C2T()
    L = ela.gamma2T().length()
    if params.rho is not None:
        rho = params.rho
        X = _planar_points(params.alpha, rho, sample_n)
    else:
        rho = min(0.05 * L, 0.5 * sheet_radius())
        while True:
            if _too_coarse(rho, L, n):
                raise MarginError(
                    f"Bbar <= C2T + {params.epsilon} needs rho below {rho:.3g}, "
                    f"which {n} points cannot resolve"
                )
            X = _planar_points(params.alpha, rho, sample_n)
            if energies(DiscreteCurve(X)).Bbar <= C2T + params.epsilon:
                break
            rho *= 0.5
    c = DiscreteCurve(X)
    if sample_n != n:
        c = resample_uniform(c, n, kind="cubic")
    bbar = energies(c).Bbar
    meta = {
        "family": "planar",
        "alpha": float(params.alpha),
        "rho": float(rho),
        "epsilon": float(params.epsilon),
        "Bbar": float(bbar),
        "threshold": float(C2T),
        "within_margin": bool(bbar <= C2T + params.epsilon),
    }
    return c.with_points(c.points, **meta)


# ---------------------------------------------------------------------------
# the figure-eight in R^3


def figure_eight_star(n, scale=1.0):
    """Figure-eight in the plane z = 0 on [0, 1); crossing at t = 0 and t = 1/2."""
    g = ela.gamma8()
    t = np.arange(n) / n
    x = 0.5 * np.pi + 2.0 * np.pi * t
    P = scale * g.point(x)
    return np.column_stack([P, np.zeros(n)]), t


def crossing_basis():
    """Unit tangents T1 = T(0), T2 = T(1/2) of the figure-eight at its crossing."""
    g = ela.gamma8()
    T1 = np.append(g.tangent(0.5 * np.pi), 0.0)
    T2 = np.append(g.tangent(1.5 * np.pi), 0.0)
    return T1, T2


def _spatial_points(alpha, rho, n, scale):
    X, t = figure_eight_star(n, scale)
    T1, T2 = crossing_basis()
    # coordinates in the basis (T1, T2) of the crossing plane
    A = np.column_stack([T1[:2], T2[:2]])
    ab = np.linalg.solve(A, X[:, :2].T).T
    out = X.copy()
    for centre, own, other, sign in ((0.0, 0, 1, 1.0), (0.5, 1, 0, -1.0)):
        d = np.abs((t - centre + 0.5) % 1.0 - 0.5)
        mask = (d < 0.25) & (np.abs(ab[:, own]) < rho)
        a = ab[mask, own]
        p = cutoff_psi(a / rho)
        new = np.zeros((mask.sum(), 2))
        new[:, own] = a
        new[:, other] = (1.0 - p) * ab[mask, other]
        out[mask, :2] = new @ A.T
        out[mask, 2] = sign * rho * rho * p * bump_u(alpha, a)
    return out


def eta_spatial(params, sample_n=None):
    """Out-of-plane family eta_alpha built on the figure-eight.

    rho is chosen as in :func:`eta_planar`, against C_8.  ``params.scale``
    enlarges the figure-eight before the perturbation is applied; since
    u_alpha is not scale invariant this moves the family along alpha / rho^4.
    """
    n = params.n_points
    sample_n = sample_n or n
    C8 = ela.constant_C8()
    L = params.scale * ela.gamma8().length()
    if params.rho is not None:
        rho = params.rho
        X = _spatial_points(params.alpha, rho, sample_n, params.scale)
    else:
        rho = 0.05 * L
        while True:
            if _too_coarse(rho, L, n):
                raise MarginError(
                    f"Bbar <= C8 + {params.epsilon} needs rho below {rho:.3g}, "
                    f"which {n} points cannot resolve"
                )
            X = _spatial_points(params.alpha, rho, sample_n, params.scale)
            if energies(DiscreteCurve(X)).Bbar <= C8 + params.epsilon:
                break
            rho *= 0.5
    c = DiscreteCurve(X)
    if sample_n != n:
        c = resample_uniform(c, n, kind="cubic")
    bbar = energies(c).Bbar
    meta = {
        "family": "spatial",
        "scale": float(params.scale),
        "alpha": float(params.alpha),
        "rho": float(rho),
        "epsilon": float(params.epsilon),
        "Bbar": float(bbar),
        "threshold": float(C8),
        "within_margin": bool(bbar <= C8 + params.epsilon),
    }
    return c.with_points(c.points, **meta)


def reflection_R():
    """The reflection diag(1, -1) that pairs eta(t) with eta(1/2 - t)."""
    return ela.RigidMotion(np.diag([1.0, -1.0]), np.zeros(2))


def lambda_rescale(c, lam):
    """Scale ``c`` by r = sqrt(B / (lam L)) so that B and lam L balance."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    en = energies(c)
    if not (en.B > 0 and en.L > 0) or not np.isfinite(en.B):
        raise ValueError("rescaling needs positive bending energy and length")
    r = np.sqrt(en.B / (lam * en.L))
    return c.with_points(r * c.points, rescale=float(r))


# ---------------------------------------------------------------------------
# embedded ovals for the preservation runs


def _polar(rfun, n):
    th = np.arange(n) * (2.0 * np.pi / n)
    r = rfun(th)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


OVAL_FAMILIES = {
    # name: (points(param, n), parameter bracket with Bbar increasing)
    "ellipse": (lambda a, n: _polar(lambda th: 1.0 / np.sqrt(np.cos(th) ** 2 + (np.sin(th) / a) ** 2), n), (1.0, 0.12)),
    "peanut": (lambda e, n: _polar(lambda th: 1.0 + e * np.cos(2 * th), n), (0.0, 0.55)),
    "trefoil": (lambda e, n: _polar(lambda th: 1.0 + e * np.cos(3 * th), n), (0.0, 0.3)),
    "square": (lambda e, n: _polar(lambda th: 1.0 + e * np.cos(4 * th), n), (0.0, 0.2)),
    "lopsided": (lambda e, n: _polar(lambda th: 1.0 + e * (np.cos(2 * th) + np.sin(3 * th)), n), (0.0, 0.25)),
}


PRESERVE_CORPUS = (("ellipse", 60.0), ("peanut", 80.0), ("trefoil", 100.0), ("square", 120.0), ("lopsided", 140.0))


def oval(family, target_bbar, n=512):
    """An embedded oval of the given family whose Bbar equals ``target_bbar``.

    The family parameter is found by bisection on a bracket over which Bbar is
    increasing; a target outside that range raises ``ValueError``.
    """
    make, (lo, hi) = OVAL_FAMILIES[family]

    def build(p):
        return resample_uniform(DiscreteCurve(make(p, 4 * n)), n, kind="cubic")

    def excess(p):
        return energies(build(p)).Bbar - target_bbar

    if excess(lo) > 0 or excess(hi) < 0:
        raise ValueError(f"{family}: Bbar {target_bbar} outside the family's range")
    p = ela.bisect(excess, lo, hi, xtol=1e-10)
    c = build(p)
    if not self_intersections(c).embedded:
        raise ValueError(f"{family}: parameter {p} is not embedded")
    return c.with_points(c.points, family=family, parameter=float(p), Bbar=float(energies(c).Bbar))
