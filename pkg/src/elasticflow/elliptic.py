"""Complete and incomplete elliptic integrals and Jacobi elliptic functions.

Everything here works with the parameter convention ``m = k**2`` and accepts
scalars or numpy arrays.  Complete integrals use the arithmetic-geometric mean,
the incomplete integrals and the amplitude use the descending Landen (Gauss)
transformation after reducing the argument with the quasi-periodicity laws

    F(x + l*pi, m) = F(x, m) + 2 l K(m)
    E(x + l*pi, m) = E(x, m) + 2 l E(m)
    am(u + 2 l K(m), m) = l*pi + am(u, m)
"""

import numpy as np

_MAX_ITER = 64
_EPS = 4.0 * np.finfo(float).eps


class DomainError(ValueError):
    """Raised for a modulus outside [0, 1)."""


def _check_m(m):
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m < 0.0) or np.any(m >= 1.0):
        raise DomainError(f"elliptic modulus must satisfy 0 <= m < 1, got {m!r}")
    return m


def _out(value, *args):
    # return a python float when every input was scalar
    if all(np.ndim(a) == 0 for a in args):
        return float(value)
    return value


def _agm_sequence(m):
    """AGM sequences a_n, b_n, c_n (c_0 = sqrt(m)) as lists of arrays."""
    a = np.ones_like(m)
    b = np.sqrt(1.0 - m)
    c = np.sqrt(m)
    seq_a, seq_b, seq_c = [a], [b], [c]
    for _ in range(_MAX_ITER):
        if np.all(np.abs(c) <= _EPS * a):
            break
        a, b, c = 0.5 * (a + b), np.sqrt(a * b), 0.5 * (a - b)
        seq_a.append(a)
        seq_b.append(b)
        seq_c.append(c)
    return seq_a, seq_b, seq_c


def _complete(m):
    seq_a, _, seq_c = _agm_sequence(m)
    K = np.pi / (2.0 * seq_a[-1])
    # E/K = 1 - sum 2^(n-1) c_n^2
    s = sum((2.0 ** (n - 1)) * c * c for n, c in enumerate(seq_c))
    return K, K * (1.0 - s)


def complete_K(m):
    """Complete elliptic integral of the first kind K(m)."""
    m0 = m
    m = _check_m(m)
    return _out(_complete(m)[0], m0)


def complete_E(m):
    """Complete elliptic integral of the second kind E(m)."""
    m0 = m
    m = _check_m(m)
    return _out(_complete(m)[1], m0)


def _landen_FE(phi, m):
    """F and E for phi in [0, pi/2] by descending Landen transformation."""
    seq_a, seq_b, seq_c = _agm_sequence(m)
    K = np.pi / (2.0 * seq_a[-1])
    ratio = 1.0 - sum((2.0 ** (n - 1)) * c * c for n, c in enumerate(seq_c))
    phis = phi
    tail = np.zeros_like(phi)
    for n in range(len(seq_a) - 1):
        a, b = seq_a[n], seq_b[n]
        d = np.arctan2(b * np.sin(phis), a * np.cos(phis))
        # keep the increment on the same lap as phi_n
        d = d + 2.0 * np.pi * np.round((phis - d) / (2.0 * np.pi))
        phis = phis + d
        tail = tail + seq_c[n + 1] * np.sin(phis)
    N = len(seq_a) - 1
    F = phis / (2.0 ** N * seq_a[-1])
    E = F * ratio + tail
    return F, E, K, K * ratio


def _reduce_angle(x):
    # x = l*pi + r with r in [-pi/2, pi/2]
    l = np.round(x / np.pi)
    return l, x - l * np.pi


def _incomplete(x, m):
    x = np.asarray(x, dtype=float)
    x, m = np.broadcast_arrays(x, m)
    l, r = _reduce_angle(x)
    F, E, K, Ec = _landen_FE(np.abs(r), m)
    sgn = np.sign(r)
    return 2.0 * l * K + sgn * F, 2.0 * l * Ec + sgn * E


def incomplete_F(x, m):
    """Incomplete elliptic integral of the first kind F(x, m) for any real x."""
    m = _check_m(m)
    return _out(_incomplete(x, m)[0], x, m)


def incomplete_E(x, m):
    """Incomplete elliptic integral of the second kind E(x, m) for any real x."""
    m = _check_m(m)
    return _out(_incomplete(x, m)[1], x, m)


def incomplete_FE(x, m):
    """Both incomplete integrals at once; shares the Landen sweep."""
    m = _check_m(m)
    F, E = _incomplete(x, m)
    return _out(F, x, m), _out(E, x, m)


def am(u, m):
    """Jacobi amplitude, the inverse of x -> F(x, m)."""
    m = _check_m(m)
    u0 = u
    u = np.asarray(u, dtype=float)
    u, m = np.broadcast_arrays(u, m)
    seq_a, _, seq_c = _agm_sequence(m)
    K = np.pi / (2.0 * seq_a[-1])
    l = np.round(u / (2.0 * K))
    r = u - 2.0 * l * K
    N = len(seq_a) - 1
    phi = (2.0 ** N) * seq_a[-1] * r
    for n in range(N, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(seq_c[n] / seq_a[n] * np.sin(phi), -1.0, 1.0)))
    # one Newton polish against the Landen F
    F, _ = _incomplete(phi, m)
    phi = phi - (F - r) * np.sqrt(1.0 - m * np.sin(phi) ** 2)
    return _out(l * np.pi + phi, u0, m)


def ellipj(u, m):
    """Return (sn, cn, dn, am) at (u, m)."""
    phi = am(u, m)
    s, c = np.sin(phi), np.cos(phi)
    d = np.sqrt(1.0 - np.asarray(m, dtype=float) * s * s)
    return _out(s, u, m), _out(c, u, m), _out(d, u, m), phi


def sn(u, m):
    return ellipj(u, m)[0]


def cn(u, m):
    return ellipj(u, m)[1]


def dn(u, m):
    return ellipj(u, m)[2]
