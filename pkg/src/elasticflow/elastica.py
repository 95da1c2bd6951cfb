"""Planar elasticae in Jacobi-elliptic form and the optimal nonembedded shapes.

Two parametrizations are used.  The arclength prototypes (``prototype``) take
s as parameter.  The named curves use the amplitude x = am(s, m) as parameter,
in which the wavelike family reads

    gamma(x|m) = (2E(x,m) - F(x,m), -2 sqrt(m) cos x),   k = 2 sqrt(m) cos x,

and the orbitlike family

    gamma(x|m) = (2E(x,m) + (m-2)F(x,m), -2 sqrt(1 - m sin^2 x)) / m,
    k = 2 sqrt(1 - m sin^2 x),

both with speed 1 / sqrt(1 - m sin^2 x).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import elliptic as ell
from .curve import DiscreteCurve, self_intersections

TWO_PI = 2.0 * np.pi
DEFAULT_DENSITY = 1024  # samples per 2 pi of parameter


class SolverError(RuntimeError):
    """Bisection could not bracket a sign change."""


# ---------------------------------------------------------------------------
# scalar functions of the modulus


def alpha(m):
    """alpha(m) = arcsin sqrt(1/(2m)), the first positive zero of 1 - 2m sin^2."""
    m = float(m)
    if not 0.5 <= m < 1.0:
        raise ell.DomainError(f"alpha needs 1/2 <= m < 1, got {m}")
    return float(np.arcsin(np.sqrt(0.5 / m)))


def G(x, m):
    """First wavelike coordinate 2E(x,m) - F(x,m)."""
    F, E = ell.incomplete_FE(x, m)
    return 2.0 * E - F


def f(m):
    """f(m) = G(pi - alpha(m), m); its root is the teardrop modulus."""
    return G(np.pi - alpha(m), m)


def orbit_first(x, m):
    """First orbitlike coordinate (2E(x,m) + (m-2)F(x,m)) / m."""
    F, E = ell.incomplete_FE(x, m)
    return (2.0 * E + (m - 2.0) * F) / m


def g(m):
    """g(m) = integral over [-pi/4, 5pi/4] of (1 - 2 sin^2) / sqrt(1 - m sin^2)."""
    m = float(m)
    if not 0.0 < m < 1.0:
        raise ell.DomainError(f"g needs 0 < m < 1, got {m}")
    # the integrand is pi-periodic and even about pi/2: integrate [-pi/4, pi/2] twice
    return 2.0 * (orbit_first(0.5 * np.pi, m) - orbit_first(-0.25 * np.pi, m))


def bisect(fun, lo, hi, xtol=1e-13, max_iter=200):
    """Plain bisection; requires a sign change on [lo, hi]."""
    flo, fhi = fun(lo), fun(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise SolverError(f"no sign change on [{lo}, {hi}]: {flo}, {fhi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if abs(hi - lo) <= xtol:
            break
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def solve_m8():
    """Root of 2E(m) - K(m): the figure-eight modulus."""
    return bisect(lambda m: 2.0 * ell.complete_E(m) - ell.complete_K(m), 0.5, 0.99)


@lru_cache(maxsize=None)
def solve_mT():
    """Root of f on [1/2, m8]: the teardrop modulus."""
    return bisect(f, 0.5, solve_m8())


@lru_cache(maxsize=None)
def solve_mH():
    """Root of g on [0.01, 0.99]: the heart modulus."""
    return bisect(g, 0.01, 0.99)


def constant_C8():
    m = solve_m8()
    return 32.0 * (2.0 * m - 1.0) * ell.complete_K(m) ** 2


def constant_C2T():
    m = solve_mT()
    return 32.0 * (2.0 * m - 1.0) * ell.incomplete_F(np.pi - alpha(m), m) ** 2


@dataclass(frozen=True)
class Constants:
    m8: float
    mT: float
    mH: float
    C8: float
    C2T: float
    alpha_T: float
    residual_m8: float
    residual_mT: float
    residual_mH: float

    def as_dict(self):
        return dict(self.__dict__)


def constants():
    m8, mT, mH = solve_m8(), solve_mT(), solve_mH()
    return Constants(
        m8=m8,
        mT=mT,
        mH=mH,
        C8=constant_C8(),
        C2T=constant_C2T(),
        alpha_T=alpha(mT),
        residual_m8=abs(2.0 * ell.complete_E(m8) - ell.complete_K(m8)),
        residual_mT=abs(f(mT)),
        residual_mH=abs(g(mH)),
    )


def teardrop_heart_ratio():
    """Scale ratio a2/a1 = sqrt(2 - mH) / sqrt(2 mT - 1) matching the junction curvature."""
    return float(np.sqrt((2.0 - solve_mH()) / (2.0 * solve_mT() - 1.0)))


# ---------------------------------------------------------------------------
# analytic curves


@dataclass(frozen=True)
class RigidMotion:
    matrix: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        v = np.asarray(self.translation, dtype=float)
        if np.max(np.abs(A @ A.T - np.eye(len(A)))) > 1e-12:
            raise ValueError("matrix part of a rigid motion must be orthogonal")
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "translation", v)

    @classmethod
    def identity(cls, n=2):
        return cls(np.eye(n), np.zeros(n))

    @property
    def det_sign(self):
        return int(np.sign(np.linalg.det(self.matrix)))

    def apply(self, p):
        return np.asarray(p) @ self.matrix.T + self.translation

    def apply_vector(self, v):
        return np.asarray(v) @ self.matrix.T


class AnalyticCurve:
    """Exact planar parametrization over ``domain = (a, b)``.

    Subclasses provide ``point``, ``derivative`` and ``second_derivative``;
    the remaining geometric quantities follow from those.
    """

    def __init__(self, domain, closed=False):
        self.domain = (float(domain[0]), float(domain[1]))
        self.closed = bool(closed)

    def point(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    def second_derivative(self, x):
        raise NotImplementedError

    def speed(self, x):
        return np.linalg.norm(self.derivative(x), axis=-1)

    def tangent(self, x):
        d = self.derivative(x)
        return d / np.linalg.norm(d, axis=-1)[..., None]

    def signed_curvature(self, x):
        d1 = self.derivative(x)
        d2 = self.second_derivative(x)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    def parameter_grid(self, n=None, endpoint=None):
        a, b = self.domain
        if n is None:
            n = max(16, int(np.ceil(DEFAULT_DENSITY * (b - a) / TWO_PI)))
        if endpoint is None:
            endpoint = not self.closed
        return np.linspace(a, b, n, endpoint=endpoint)

    def sample(self, n=None, endpoint=None, **meta):
        """Sample at ``n`` equally spaced parameters (closed curves omit the endpoint)."""
        x = self.parameter_grid(n, endpoint)
        md = {"parametrization": "uniform in curve parameter", "domain": list(self.domain)}
        md.update(meta)
        return DiscreteCurve(self.point(x), closed=self.closed, metadata=md)

    def _quad(self, fun, n=4000):
        # Gauss-Legendre on panels; integrands here are smooth
        a, b = self.domain
        nodes, weights = np.polynomial.legendre.leggauss(20)
        edges = np.linspace(a, b, n // 20 + 1)
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        return float(np.sum(w * fun(x)))

    def length(self):
        return self._quad(self.speed)

    def total_curvature(self):
        return self._quad(lambda x: self.signed_curvature(x) * self.speed(x))

    def bending_energy(self):
        return self._quad(lambda x: self.signed_curvature(x) ** 2 * self.speed(x))


def _xm(x, m):
    x = np.asarray(x, dtype=float)
    return x, np.sin(x), np.cos(x), 1.0 - m * np.sin(x) ** 2


class WavelikeCurve(AnalyticCurve):
    """Wavelike elastica in the amplitude parametrization."""

    def __init__(self, m, domain=(0.0, TWO_PI), closed=False):
        if not 0.0 < m < 1.0:
            raise ell.DomainError(f"wavelike modulus must lie in (0, 1), got {m}")
        super().__init__(domain, closed)
        self.m = float(m)

    def point(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([G(x, self.m), -2.0 * np.sqrt(self.m) * np.cos(x)], axis=-1)

    def derivative(self, x):
        x, s, c, w = _xm(x, self.m)
        m = self.m
        return np.stack([(1.0 - 2.0 * m * s * s) / np.sqrt(w), 2.0 * np.sqrt(m) * s], axis=-1)

    def second_derivative(self, x):
        x, s, c, w = _xm(x, self.m)
        m = self.m
        d1 = m * 2.0 * s * c * w ** -1.5 * (m * s * s - 1.5)
        return np.stack([d1, 2.0 * np.sqrt(m) * c], axis=-1)

    def signed_curvature(self, x):
        return 2.0 * np.sqrt(self.m) * np.cos(np.asarray(x, dtype=float))

    def speed(self, x):
        x, s, c, w = _xm(x, self.m)
        return 1.0 / np.sqrt(w)


class OrbitlikeCurve(AnalyticCurve):
    """Orbitlike elastica in the amplitude parametrization."""

    def __init__(self, m, domain=(0.0, np.pi), closed=False):
        if not 0.0 < m < 1.0:
            raise ell.DomainError(f"orbitlike modulus must lie in (0, 1), got {m}")
        super().__init__(domain, closed)
        self.m = float(m)

    def point(self, x):
        x, s, c, w = _xm(x, self.m)
        return np.stack([orbit_first(x, self.m), -2.0 * np.sqrt(w) / self.m], axis=-1)

    def derivative(self, x):
        x, s, c, w = _xm(x, self.m)
        return np.stack([(1.0 - 2.0 * s * s) / np.sqrt(w), 2.0 * s * c / np.sqrt(w)], axis=-1)

    def second_derivative(self, x):
        x, s, c, w = _xm(x, self.m)
        m = self.m
        s2 = 2.0 * s * c
        d1 = s2 * w ** -1.5 * (-2.0 + 0.5 * m + m * s * s)
        d2 = 2.0 * np.cos(2.0 * x) / np.sqrt(w) + s2 * (0.5 * m * s2) * w ** -1.5
        return np.stack([d1, d2], axis=-1)

    def signed_curvature(self, x):
        x, s, c, w = _xm(x, self.m)
        return 2.0 * np.sqrt(w)

    def speed(self, x):
        x, s, c, w = _xm(x, self.m)
        return 1.0 / np.sqrt(w)


@dataclass(frozen=True)
class PrototypeKind:
    tag: str
    m: float = None
    R: float = None

    def __post_init__(self):
        if self.tag not in ("linear", "wavelike", "borderline", "orbitlike", "circular"):
            raise ValueError(f"unknown prototype {self.tag!r}")
        if self.tag in ("wavelike", "orbitlike"):
            if self.m is None or not 0.0 < self.m < 1.0:
                raise ell.DomainError(f"{self.tag} prototype needs 0 < m < 1, got {self.m}")
        if self.tag == "circular" and (self.R is None or self.R <= 0):
            raise ValueError(f"circular prototype needs R > 0, got {self.R}")


class ArclengthPrototype(AnalyticCurve):
    """The five elastic prototypes, parametrized by arclength."""

    def __init__(self, kind, domain=(-TWO_PI, TWO_PI)):
        closed = kind.tag == "circular" and np.isclose(domain[1] - domain[0], TWO_PI * kind.R)
        super().__init__(domain, closed)
        self.kind = kind

    def _jac(self, s):
        sn_, cn_, dn_, phi = ell.ellipj(np.asarray(s, dtype=float), self.kind.m)
        return np.asarray(sn_), np.asarray(cn_), np.asarray(dn_), np.asarray(phi)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        tag, m = self.kind.tag, self.kind.m
        if tag == "linear":
            return np.stack([s, np.zeros_like(s)], axis=-1)
        if tag == "circular":
            R = self.kind.R
            return np.stack([R * np.cos(s / R), R * np.sin(s / R)], axis=-1)
        if tag == "borderline":
            return np.stack([2.0 * np.tanh(s) - s, -2.0 / np.cosh(s)], axis=-1)
        sn_, cn_, dn_, phi = self._jac(s)
        E = ell.incomplete_E(phi, m)
        if tag == "wavelike":
            return np.stack([2.0 * E - s, -2.0 * np.sqrt(m) * cn_], axis=-1)
        return np.stack([(2.0 * E + (m - 2.0) * s) / m, -2.0 * dn_ / m], axis=-1)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        tag, m = self.kind.tag, self.kind.m
        if tag == "linear":
            return np.stack([np.ones_like(s), np.zeros_like(s)], axis=-1)
        if tag == "circular":
            R = self.kind.R
            return np.stack([-np.sin(s / R), np.cos(s / R)], axis=-1)
        if tag == "borderline":
            sech = 1.0 / np.cosh(s)
            return np.stack([2.0 * sech ** 2 - 1.0, 2.0 * sech * np.tanh(s)], axis=-1)
        sn_, cn_, dn_, _ = self._jac(s)
        if tag == "wavelike":
            return np.stack([2.0 * dn_ ** 2 - 1.0, 2.0 * np.sqrt(m) * sn_ * dn_], axis=-1)
        return np.stack([(2.0 * dn_ ** 2 + m - 2.0) / m, 2.0 * sn_ * cn_], axis=-1)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        tag, m = self.kind.tag, self.kind.m
        if tag == "linear":
            return np.zeros(s.shape + (2,))
        if tag == "circular":
            R = self.kind.R
            return np.stack([-np.cos(s / R) / R, -np.sin(s / R) / R], axis=-1)
        if tag == "borderline":
            sech, th = 1.0 / np.cosh(s), np.tanh(s)
            return np.stack([-4.0 * sech ** 2 * th, 2.0 * sech * (sech ** 2 - th ** 2)], axis=-1)
        sn_, cn_, dn_, _ = self._jac(s)
        if tag == "wavelike":
            return np.stack(
                [-4.0 * m * sn_ * cn_ * dn_, 2.0 * np.sqrt(m) * cn_ * (dn_ ** 2 - m * sn_ ** 2)], axis=-1
            )
        return np.stack([-4.0 * sn_ * cn_ * dn_, 2.0 * dn_ * (cn_ ** 2 - sn_ ** 2)], axis=-1)

    def signed_curvature(self, s):
        s = np.asarray(s, dtype=float)
        tag, m = self.kind.tag, self.kind.m
        if tag == "linear":
            return np.zeros_like(s)
        if tag == "circular":
            return np.full_like(s, 1.0 / self.kind.R)
        if tag == "borderline":
            return 2.0 / np.cosh(s)
        sn_, cn_, dn_, _ = self._jac(s)
        if tag == "wavelike":
            return 2.0 * np.sqrt(m) * cn_
        return 2.0 * dn_

    def speed(self, s):
        return np.ones_like(np.asarray(s, dtype=float))


def prototype(kind, domain=None):
    """Arclength prototype for a ``PrototypeKind`` (or its tag with keyword values)."""
    if isinstance(kind, str):
        kind = PrototypeKind(kind)
    if domain is None:
        domain = (0.0, TWO_PI * kind.R) if kind.tag == "circular" else (-TWO_PI, TWO_PI)
    return ArclengthPrototype(kind, domain)


class PiecewiseCurve(AnalyticCurve):
    """Concatenation of similarity images ``motion(scale * piece)``.

    Each piece is an ``(AnalyticCurve, scale, RigidMotion)`` triple; the global
    parameter runs through the piece domains one after the other.
    """

    def __init__(self, pieces, start=0.0, closed=False):
        self.pieces = [(c, float(sc), mo) for c, sc, mo in pieces]
        self.offsets = [float(start)]
        for c, _, _ in self.pieces:
            self.offsets.append(self.offsets[-1] + (c.domain[1] - c.domain[0]))
        super().__init__((self.offsets[0], self.offsets[-1]), closed)

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.offsets, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        return x, idx

    def _eval(self, x, what):
        x, idx = self._locate(x)
        out = np.empty(x.shape + (2,))
        for k, (c, sc, mo) in enumerate(self.pieces):
            sel = idx == k
            if not np.any(sel):
                continue
            y = c.domain[0] + (x[sel] - self.offsets[k])
            if what == 0:
                out[sel] = mo.apply(sc * c.point(y))
            elif what == 1:
                out[sel] = mo.apply_vector(sc * c.derivative(y))
            else:
                out[sel] = mo.apply_vector(sc * c.second_derivative(y))
        return out

    def point(self, x):
        return self._eval(x, 0)

    def derivative(self, x):
        return self._eval(x, 1)

    def second_derivative(self, x):
        return self._eval(x, 2)

    def signed_curvature(self, x):
        x, idx = self._locate(x)
        out = np.empty(x.shape)
        for k, (c, sc, mo) in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                y = c.domain[0] + (x[sel] - self.offsets[k])
                out[sel] = mo.det_sign * c.signed_curvature(y) / sc
        return out

    def speed(self, x):
        x, idx = self._locate(x)
        out = np.empty(x.shape)
        for k, (c, sc, mo) in enumerate(self.pieces):
            sel = idx == k
            if np.any(sel):
                out[sel] = sc * c.speed(c.domain[0] + (x[sel] - self.offsets[k]))
        return out

    def sample(self, n=None, endpoint=None, **meta):
        md = {"pieces": [[self.offsets[k], self.offsets[k + 1]] for k in range(len(self.pieces))]}
        md.update(meta)
        return super().sample(n, endpoint, **md)


# ---------------------------------------------------------------------------
# named curves


def gamma8():
    """Figure-eight elastica on [0, 2 pi]."""
    return WavelikeCurve(solve_m8(), (0.0, TWO_PI), closed=True)


def teardrop_interval(m=None):
    m = solve_mT() if m is None else m
    b = np.pi - alpha(m)
    return -b, b


def gammaT():
    """Teardrop elastica: wavelike at m_T on [-pi + alpha, pi - alpha]."""
    return WavelikeCurve(solve_mT(), teardrop_interval(), closed=False)


def gammaH():
    """Heart-shaped elastica: orbitlike at m_H on [-pi/4, 5 pi/4]."""
    return OrbitlikeCurve(solve_mH(), (-0.25 * np.pi, 1.25 * np.pi), closed=False)


def gamma2T():
    """Elastic two-teardrop on [-2b, 2b] with b = pi - alpha(m_T).

    For x in [0, 2b] it is the teardrop gamma_T(x - b); for x in [-2b, 0] it is
    the point reflection 2p - gamma_T(x + b) through the cusp p = gamma_T(b).
    """
    T = gammaT()
    a, b = T.domain
    p = T.point(b)
    refl = RigidMotion(-np.eye(2), 2.0 * p)
    return PiecewiseCurve([(T, 1.0, refl), (T, 1.0, RigidMotion.identity())], start=-2.0 * b, closed=True)


def teardrop_heart():
    """Teardrop followed by the scaled, reflected heart glued at the cusp.

    The heart is scaled by a2 = sqrt(2 - m_H) / sqrt(2 m_T - 1) relative to the
    unit teardrop, reflected by diag(1, -1) and translated so its endpoint lands
    on gamma_T(a_T).  The result is translated so the cusp sits at the origin.
    """
    T, H = gammaT(), gammaH()
    a2 = teardrop_heart_ratio()
    S = np.diag([1.0, -1.0])
    v = T.point(T.domain[0]) - S @ (a2 * H.point(H.domain[1]))
    shift = -T.point(T.domain[0])
    first = RigidMotion(np.eye(2), shift)
    second = RigidMotion(S, v + shift)
    return PiecewiseCurve([(T, 1.0, first), (H, a2, second)], start=T.domain[0], closed=True)


def wavelike_self_intersects(m, n=6144):
    """True iff the sampled wavelike curve on [-2 pi, 4 pi] crosses itself."""
    c = WavelikeCurve(m, (-TWO_PI, 2.0 * TWO_PI)).sample(n)
    return not self_intersections(c, prox_tol=0.0).embedded
