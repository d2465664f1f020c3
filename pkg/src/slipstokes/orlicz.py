"""N-functions, stress laws and the algebra of shifted potentials.

Matrices are handled as arrays with trailing shape ``(2, 2)``; ``|A|`` is the
Frobenius norm and ``A . B`` the Frobenius inner product. :class:`SymMatrix2`
is a small convenience wrapper for scalar use.

All potentials are immutable after construction and evaluate elementwise on
numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = [
    "SymMatrix2",
    "TypeIndices",
    "NFunction",
    "PowerLaw",
    "Carreau",
    "TabulatedNFunction",
    "ShiftedNFunction",
    "ConjugateNFunction",
    "BisectionError",
    "make_power",
    "make_carreau",
    "load_table",
    "shifted",
    "stress",
    "v_map",
    "conjugate_value",
    "dphi_inverse",
    "estimate_indices",
    "hammer_gap",
    "integrate_from_zero",
    "frob",
    "frob_inner",
]

_TINY = 1e-300


class BisectionError(RuntimeError):
    """The generalized inverse of a derivative could not be bracketed."""


class SymMatrix2(NamedTuple):
    a11: float
    a12: float
    a22: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a12, self.a22]], dtype=float)

    @classmethod
    def from_matrix(cls, m) -> "SymMatrix2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    @property
    def norm(self) -> float:
        return math.sqrt(self.a11**2 + 2 * self.a12**2 + self.a22**2)


@dataclass(frozen=True)
class TypeIndices:
    """Growth envelope ``Phi(st) <= K max(s^p, s^q) Phi(t)``."""

    p_lower: float
    q_upper: float
    K: float

    def __post_init__(self):
        if not (self.p_lower > 1 and self.q_upper >= self.p_lower and self.K >= 1):
            raise ValueError(f"invalid type indices {self}")


def frob(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return np.sqrt(np.sum(a * a, axis=(-2, -1)))


def frob_inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=(-2, -1))


# --------------------------------------------------------------------------
# quadrature and inversion helpers

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def _graded_nodes(levels: int, order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    nodes, weights = [], []
    # dyadic panels [2^-(k+1), 2^-k] on the unit interval, plus [0, 2^-levels]
    for k in range(levels):
        lo, hi = 2.0 ** -(k + 1), 2.0**-k
        nodes.append(lo + (hi - lo) * x)
        weights.append((hi - lo) * w)
    hi = 2.0**-levels
    nodes.append(hi * x)
    weights.append(hi * w)
    return np.concatenate(nodes), np.concatenate(weights)


_GRADED = {}


def integrate_from_zero(f, s, levels: int = 40, order: int = 10) -> np.ndarray:
    """Composite Gauss-Legendre rule for ``int_0^s f(t) dt``.

    Panels are graded geometrically towards 0, which resolves integrable
    endpoint singularities like ``t^(p-1)`` and the transition layer of
    shifted functions. ``f`` must accept arrays and broadcast.
    """
    key = (levels, order)
    if key not in _GRADED:
        _GRADED[key] = _graded_nodes(levels, order)
    u, w = _GRADED[key]
    s = np.asarray(s, dtype=float)
    t = s[..., None] * u
    return s * np.sum(f(t) * w, axis=-1)


def dphi_inverse(dphi, s, rtol: float = 1e-12, max_iter: int = 400) -> np.ndarray:
    """Generalized inverse ``sup{r >= 0 : dphi(r) <= s}`` by bisection.

    The upper bracket is doubled until ``dphi(hi) > s``; flat segments of a
    monotone ``dphi`` are handled by construction.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("dphi_inverse needs finite s >= 0")
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    while True:
        low_hi = dphi(hi) <= s
        if not np.any(low_hi):
            break
        if np.any(hi[low_hi] > 1e300):
            raise BisectionError("could not bracket the inverse; dphi does not grow to infinity")
        lo = np.where(low_hi, hi, lo)
        hi = np.where(low_hi, 2.0 * hi, hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = dphi(mid) <= s
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= rtol * hi + _TINY):
            break
    else:
        raise BisectionError("bisection did not converge")
    if not np.all(np.isfinite(dphi(lo))):
        raise BisectionError("derivative is not finite inside the bracket")
    return 0.5 * (lo + hi)


# --------------------------------------------------------------------------
# N-functions


class NFunction:
    """Convex potential ``Phi`` with ``Phi(0) = Phi'(0) = 0``.

    Subclasses implement :meth:`dphi` and :meth:`ddphi`; :meth:`phi` falls
    back to quadrature of the derivative.
    """

    model = "custom"
    p = float("nan")
    mu0 = 1.0

    def phi(self, t):
        return integrate_from_zero(self.dphi, t)

    def dphi(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def ddphi(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def mu(self, t):
        """Generalized viscosity ``Phi'(t)/t``; the limit value at ``t = 0``."""
        t = np.asarray(t, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        return np.where(t > 0, self.dphi(safe) / safe, self._mu_at_zero())

    def _mu_at_zero(self) -> float:
        return float(self.ddphi(np.asarray(1e-300)))

    def newton_coefficients(self, t):
        """Return ``(mu(t), (Phi''(t) - mu(t)) / t^2)``.

        These are the two scalars entering the Hessian of ``A -> Phi(|A|)``.
        The second coefficient is set to 0 at ``t = 0`` where it multiplies a
        vanishing rank-one term.
        """
        t = np.asarray(t, dtype=float)
        pos = t > 0
        safe = np.where(pos, t, 1.0)
        m = self.mu(t)
        c2 = np.where(pos, (self.ddphi(safe) - self.dphi(safe) / safe) / safe**2, 0.0)
        return m, c2

    def dphi_inv(self, s):
        return dphi_inverse(self.dphi, s)

    @property
    def indices(self) -> TypeIndices | None:
        return None

    @property
    def is_quadratic(self) -> bool:
        return False

    @property
    def almost_decreasing(self) -> bool:
        """Shear thinning flag: ``Phi''`` almost decreasing."""
        t = np.logspace(-4, 4, 401)
        d2 = self.ddphi(t)
        return bool(d2[-1] <= d2[0])

    def conjugate(self) -> "NFunction":
        return ConjugateNFunction(self)

    def shifted(self, a) -> "ShiftedNFunction":
        return ShiftedNFunction(self, a)


class PowerLaw(NFunction):
    model = "power"

    def __init__(self, p: float, mu0: float = 1.0):
        if not p > 1:
            raise ValueError(f"power law needs p > 1, got {p}")
        if not mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {mu0}")
        self.p = float(p)
        self.mu0 = float(mu0)

    def __repr__(self):
        return f"PowerLaw(p={self.p}, mu0={self.mu0})"

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * t**self.p / self.p

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * t ** (self.p - 1)

    def ddphi(self, t):
        t = np.asarray(t, dtype=float)
        if self.p == 2:
            return np.full_like(t, self.mu0)
        with np.errstate(divide="ignore"):
            return self.mu0 * (self.p - 1) * t ** (self.p - 2)

    def _mu_at_zero(self):
        if self.p == 2:
            return self.mu0
        return math.inf if self.p < 2 else 0.0

    def dphi_inv(self, s):
        s = np.asarray(s, dtype=float)
        return (s / self.mu0) ** (1.0 / (self.p - 1))

    @property
    def indices(self):
        return TypeIndices(self.p, self.p, 1.0)

    @property
    def is_quadratic(self):
        return self.p == 2

    @property
    def almost_decreasing(self):
        return self.p <= 2

    def conjugate(self):
        # (Phi')^{-1}(s) = (s/mu0)^(1/(p-1)) is again a power law in s
        return PowerLaw(self.p / (self.p - 1), self.mu0 ** (-1.0 / (self.p - 1)))


class Carreau(NFunction):
    """``Phi'(t) = mu0 (1 + t^2)^((p-2)/2) t``."""

    model = "carreau"

    def __init__(self, p: float, mu0: float = 1.0):
        if not p > 1:
            raise ValueError(f"Carreau law needs p > 1, got {p}")
        if not mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {mu0}")
        self.p = float(p)
        self.mu0 = float(mu0)

    def __repr__(self):
        return f"Carreau(p={self.p}, mu0={self.mu0})"

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        # expm1/log1p form avoids cancellation for small t
        return self.mu0 / self.p * np.expm1(0.5 * self.p * np.log1p(t * t))

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * (1 + t * t) ** (0.5 * (self.p - 2)) * t

    def ddphi(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * (1 + t * t) ** (0.5 * (self.p - 4)) * (1 + (self.p - 1) * t * t)

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * (1 + t * t) ** (0.5 * (self.p - 2))

    def newton_coefficients(self, t):
        t = np.asarray(t, dtype=float)
        # Phi'' - mu = mu0 (p-2) t^2 (1+t^2)^((p-4)/2)
        return self.mu(t), self.mu0 * (self.p - 2) * (1 + t * t) ** (0.5 * (self.p - 4))

    @property
    def is_quadratic(self):
        return self.p == 2

    @property
    def almost_decreasing(self):
        return self.p <= 2


class TabulatedNFunction(NFunction):
    """``Phi'`` from a ``(t, Phi'(t))`` table with monotone-cubic interpolation.

    Beyond the last knot the derivative continues as a power law whose
    exponent is the log-slope of the last table segment.
    """

    model = "table"

    def __init__(self, t, dphi_values):
        t = np.asarray(t, dtype=float)
        d = np.asarray(dphi_values, dtype=float)
        if t.ndim != 1 or t.shape != d.shape or t.size < 2:
            raise ValueError("table needs two columns of equal length >= 2")
        if np.any(np.diff(t) <= 0) or np.any(np.diff(d) <= 0):
            raise ValueError("table columns must be strictly increasing")
        if t[0] < 0 or d[0] < 0:
            raise ValueError("table must live in t >= 0 with Phi' >= 0")
        if t[0] > 0:
            t = np.concatenate([[0.0], t])
            d = np.concatenate([[0.0], d])
        elif d[0] != 0:
            raise ValueError("Phi'(0) must be 0")
        self._t = t
        self._d = d
        self._interp = PchipInterpolator(t, d, extrapolate=False)
        self._anti = self._interp.antiderivative()
        self._deriv = self._interp.derivative()
        self._tn = t[-1]
        self._dn = d[-1]
        self._phin = float(self._anti(t[-1]))
        self._k = math.log(d[-1] / d[-2]) / math.log(t[-1] / t[-2]) if t[-2] > 0 else 1.0
        self.p = float("nan")

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self._tn
        ti = np.where(inside, t, self._tn)
        tail = self._dn * (np.maximum(t, self._tn) / self._tn) ** self._k
        return np.where(inside, self._interp(ti), tail)

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self._tn
        ti = np.where(inside, t, self._tn)
        r = np.maximum(t, self._tn) / self._tn
        tail = self._phin + self._dn * self._tn / (self._k + 1) * (r ** (self._k + 1) - 1)
        return np.where(inside, self._anti(ti), tail)

    def ddphi(self, t):
        t = np.asarray(t, dtype=float)
        inside = t <= self._tn
        ti = np.where(inside, t, self._tn)
        tt = np.maximum(t, self._tn)
        tail = self._k * self._dn * (tt / self._tn) ** self._k / tt
        return np.where(inside, self._deriv(ti), tail)

    def _mu_at_zero(self):
        return float(self._deriv(0.0))


class ShiftedNFunction(NFunction):
    """``Phi_a`` with ``Phi_a'(s) = Phi'(a + s) s / (a + s)``.

    The shift ``a`` may be an array; it broadcasts against the argument.
    """

    def __init__(self, base: NFunction, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("shift must be >= 0")
        self.base = base
        self.a = a
        self.model = f"shifted-{base.model}"
        self.p = base.p
        self.mu0 = base.mu0

    def __repr__(self):
        return f"ShiftedNFunction({self.base!r}, a={self.a})"

    def dphi(self, s):
        s = np.asarray(s, dtype=float)
        at = self.a + s
        safe = np.where(at > 0, at, 1.0)
        return np.where(at > 0, self.base.dphi(safe) * s / safe, 0.0)

    def mu(self, s):
        s = np.asarray(s, dtype=float)
        return self.base.mu(self.a + s)

    def ddphi(self, s):
        s = np.asarray(s, dtype=float)
        at = self.a + s
        safe = np.where(at > 0, at, 1.0)
        val = self.base.ddphi(safe) * s / safe + self.base.dphi(safe) * self.a / safe**2
        return np.where(at > 0, val, self.base.ddphi(np.asarray(1e-300)))

    def newton_coefficients(self, s):
        s = np.asarray(s, dtype=float)
        at = self.a + s
        m, c2 = self.base.newton_coefficients(at)
        pos = s > 0
        # Phi_a'' - mu_a = s/(a+s) (Phi''(a+s) - mu(a+s))
        c2s = np.where(pos, c2 * at * at / (at * np.where(pos, s, 1.0)), 0.0)
        return m, c2s

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        a = np.broadcast_to(self.a, np.broadcast_shapes(self.a.shape, s.shape))
        if isinstance(self.base, PowerLaw) and self.base.p != 2:
            return _shifted_power_phi(self.base, a, s)
        if not np.any(a):
            return self.base.phi(s)
        return integrate_from_zero(
            lambda t: _shifted_dphi(self.base, a[..., None], t), np.broadcast_to(s, a.shape)
        )

    @property
    def is_quadratic(self):
        return self.base.is_quadratic and isinstance(self.base, PowerLaw)

    @property
    def almost_decreasing(self):
        return self.base.almost_decreasing


def _shifted_dphi(base, a, t):
    at = a + t
    safe = np.where(at > 0, at, 1.0)
    return np.where(at > 0, base.dphi(safe) * t / safe, 0.0)


def _shifted_power_phi(base: PowerLaw, a, s):
    p, m0 = base.p, base.mu0
    s = np.broadcast_to(s, a.shape)
    closed = m0 * (
        ((a + s) ** p - a**p) / p - a * ((a + s) ** (p - 1) - a ** (p - 1)) / (p - 1)
    )
    # the closed form cancels badly for s << a; sum the binomial series there
    small = (s < 0.1 * a) & (s > 0)
    if np.any(small):
        aa, sig = a[small], s[small] / a[small]
        total = np.zeros_like(sig)
        coef, power = 1.0, sig * sig
        for k in range(18):
            total += coef * power / (k + 2)
            coef *= (p - 2 - k) / (k + 1)
            power = power * sig
        closed = np.array(closed, dtype=float, copy=True)
        closed[small] = m0 * aa**p * total
    return closed


class ConjugateNFunction(NFunction):
    """Complementary function ``Phi*`` with ``(Phi*)' = (Phi')^{-1}``."""

    def __init__(self, base: NFunction):
        self.base = base
        self.model = f"conjugate-{base.model}"

    def dphi(self, s):
        return self.base.dphi_inv(s)

    def ddphi(self, s):
        s = np.asarray(s, dtype=float)
        r = self.base.dphi_inv(s)
        with np.errstate(divide="ignore"):
            return 1.0 / self.base.ddphi(r)

    def phi(self, s):
        # Young equality: Phi*(s) = s r - Phi(r) with r = (Phi')^{-1}(s)
        s = np.asarray(s, dtype=float)
        r = self.base.dphi_inv(s)
        return s * r - self.base.phi(r)

    def dphi_inv(self, t):
        return self.base.dphi(t)

    def conjugate(self):
        return self.base

    @property
    def almost_decreasing(self):
        return not self.base.almost_decreasing


# --------------------------------------------------------------------------
# public constructors and pointwise maps


def make_power(p: float, mu0: float = 1.0) -> PowerLaw:
    """Power-law potential ``Phi(t) = mu0 t^p / p``."""
    return PowerLaw(p, mu0)


def make_carreau(p: float, mu0: float = 1.0) -> Carreau:
    """Carreau-type potential, ``S(A) = mu0 (1 + |A|^2)^((p-2)/2) A``."""
    return Carreau(p, mu0)


def load_table(path) -> TabulatedNFunction:
    """Read a two-column ``(t, Phi'(t))`` text table."""
    data = np.loadtxt(path, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns, got {data.shape[1]}")
    return TabulatedNFunction(data[:, 0], data[:, 1])


def shifted(phi: NFunction, a) -> ShiftedNFunction:
    return ShiftedNFunction(phi, a)


def _as_matrix(A):
    if isinstance(A, SymMatrix2):
        return A.matrix(), True
    return np.asarray(A, dtype=float), False


def stress(phi: NFunction, A):
    """``S(A) = Phi'(|A|) A / |A|`` with ``S(0) = 0``."""
    m, wrap = _as_matrix(A)
    t = frob(m)
    safe = np.where(t > 0, t, 1.0)
    factor = np.where(t > 0, phi.dphi(safe) / safe, 0.0)
    out = factor[..., None, None] * m
    return SymMatrix2.from_matrix(out) if wrap else out


def v_map(phi: NFunction, A):
    """``V(A) = sqrt(Phi'(|A|) |A|) A / |A|`` with ``V(0) = 0``."""
    m, wrap = _as_matrix(A)
    t = frob(m)
    safe = np.where(t > 0, t, 1.0)
    factor = np.where(t > 0, np.sqrt(phi.dphi(safe) * safe) / safe, 0.0)
    out = factor[..., None, None] * m
    return SymMatrix2.from_matrix(out) if wrap else out


def conjugate_value(phi: NFunction, s, method: str = "quadrature"):
    """Complementary function ``Phi*(s) = int_0^s (Phi')^{-1}(t) dt``.

    Power laws use the closed form. Otherwise ``method="quadrature"`` runs
    the graded Gauss rule over the bisection inverse and ``method="legendre"``
    uses ``s r - Phi(r)`` at ``r = (Phi')^{-1}(s)``.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("conjugate needs s >= 0")
    if isinstance(phi, PowerLaw):
        return phi.conjugate().phi(s)
    if method == "quadrature":
        return integrate_from_zero(phi.dphi_inv, s)
    if method == "legendre":
        return ConjugateNFunction(phi).phi(s)
    raise ValueError(f"unknown method {method!r}")


def estimate_indices(phi: NFunction, s_grid=None, t_grid=None, k_max: float = 1e6) -> TypeIndices:
    """Empirical type indices ``(p, q, K)`` of ``phi`` on a sampled lattice.

    The exponents bracket the local index ``t Phi'(t) / Phi(t)`` over every
    argument reached by the lattice; ``K`` is then the smallest constant for
    which both envelope inequalities hold on the ``(s, t)`` lattice. Power
    laws return ``(p, p, 1)`` without sampling.
    """
    if phi.indices is not None:
        return phi.indices
    s_grid = np.logspace(-3, 3, 61) if s_grid is None else np.asarray(s_grid, dtype=float)
    t_grid = np.logspace(-3, 3, 61) if t_grid is None else np.asarray(t_grid, dtype=float)
    if s_grid.min() > 1e-3 or s_grid.max() < 1e3 or t_grid.min() > 1e-3 or t_grid.max() < 1e3:
        raise ValueError("grids must cover at least [1e-3, 1e3]")
    S, T = np.meshgrid(s_grid, t_grid, indexing="ij")
    args = np.unique(np.concatenate([t_grid, (S * T).ravel()]))
    local = args * phi.dphi(args) / phi.phi(args)
    p, q = float(local.min()), float(local.max())
    if not p > 1:
        raise ValueError(f"lower index {p:.4g} <= 1: not of finite type on the sampled range")
    ratio = phi.phi(S * T) / phi.phi(T)
    upper = ratio / np.maximum(S**p, S**q)
    lower = np.minimum(S**p, S**q) / ratio
    K = max(1.0, float(upper.max()), float(lower.max()))
    if K > k_max:
        raise ValueError(f"no K <= {k_max:g} fits the sampled lattice (needed {K:.3g})")
    return TypeIndices(p, q, K)


def hammer_gap(phi: NFunction, P, Q):
    """The five quantities that are mutually comparable for stress monotonicity.

    Returns ``((S(P)-S(Q)).(P-Q), |V(P)-V(Q)|^2, Phi_{|Q|}(|P-Q|),
    (Phi*)_{|S(Q)|}(|S(P)-S(Q)|), Phi''(|P|+|Q|) |P-Q|^2)``, elementwise over
    leading axes.
    """
    P, _ = _as_matrix(P)
    Q, _ = _as_matrix(Q)
    SP, SQ = stress(phi, P), stress(phi, Q)
    VP, VQ = v_map(phi, P), v_map(phi, Q)
    d = frob(P - Q)
    e1 = frob_inner(SP - SQ, P - Q)
    e2 = frob(VP - VQ) ** 2
    e3 = ShiftedNFunction(phi, frob(Q)).phi(d)
    e4 = ShiftedNFunction(phi.conjugate(), frob(SQ)).phi(frob(SP - SQ))
    tot = frob(P) + frob(Q)
    with np.errstate(invalid="ignore", divide="ignore"):
        e5 = np.where(d > 0, phi.ddphi(np.where(tot > 0, tot, 1.0)) * d * d, 0.0)
    return tuple(np.asarray(e, dtype=float)[()] for e in (e1, e2, e3, e4, e5))
