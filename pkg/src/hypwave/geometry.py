"""Closed-form hyperboloidal geometry of the forward light cone.

Coordinates tau = sqrt(t^2 - |x|^2), rho = arcsinh(|x|/tau), theta = x/|x|
on the region {t > |x|}, the Lorentz boosts L^i = t d_{x^i} + x^i d_t,
rotations O_ij, the Morawetz multiplier K = (t^2+|x|^2) d_t + 2 t r d_r,
their commutators, and the quadratic-form identities relating boost
derivatives to the induced metric on the level sets of tau.

Everything here is evaluated pointwise with analytic derivatives (see
:mod:`hypwave.testfuncs`); no finite differences enter, so residuals at the
1e-10 level indicate formula errors rather than discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .testfuncs import AnalyticTestFunction

__all__ = [
    "SpacetimePoint",
    "HyperboloidalCoords",
    "VectorFieldId",
    "Dt",
    "Dx",
    "Boost",
    "Rotation",
    "Morawetz",
    "Dtau",
    "Drho",
    "OutsideLightConeError",
    "SingularDirectionError",
    "UnsupportedPairError",
    "to_hyperboloidal",
    "from_hyperboloidal",
    "vector_field",
    "apply_field",
    "commutator_residual",
    "quadratic_form_residual",
    "boost_on_hyperboloid",
]


class OutsideLightConeError(ValueError):
    """Raised when a point violates t > |x|."""


class SingularDirectionError(ValueError):
    """Raised for chart-singular requests (e.g. d_rho at x = 0)."""


class UnsupportedPairError(KeyError):
    """Raised for a commutator pair with no tabulated identity."""


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: np.ndarray  # shape (d,)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        if self.x.ndim != 1 or self.x.shape[0] < 2:
            raise ValueError("x must be a d-vector with d >= 2")

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.x))


@dataclass(frozen=True)
class HyperboloidalCoords:
    tau: float
    rho: float
    theta: np.ndarray  # unit vector, shape (d,)

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))


def to_hyperboloidal(p: SpacetimePoint) -> HyperboloidalCoords:
    """Convert a point with t > |x| to (tau, rho, theta).

    theta is fixed to e_1 when x = 0 (the chart direction is arbitrary on
    the axis rho = 0).
    """
    r = p.r
    if p.t <= r:
        raise OutsideLightConeError(
            f"point has t = {p.t} <= |x| = {r}; requires t > |x|")
    tau = math.sqrt(p.t * p.t - r * r)
    rho = math.asinh(r / tau)
    if r == 0.0:
        theta = np.zeros(p.d)
        theta[0] = 1.0
    else:
        theta = p.x / r
    return HyperboloidalCoords(tau=tau, rho=rho, theta=theta)


def from_hyperboloidal(h: HyperboloidalCoords) -> SpacetimePoint:
    """Inverse chart: t = tau cosh(rho), x = tau sinh(rho) theta."""
    t = h.tau * math.cosh(h.rho)
    x = h.tau * math.sinh(h.rho) * h.theta
    return SpacetimePoint(t=t, x=x)


# ---------------------------------------------------------------------------
# Vector fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorFieldId:
    """Tagged identifier; indices are 1-based as in the usual notation."""

    tag: str
    i: int = 0
    j: int = 0

    def __str__(self):
        if self.tag in ("dx", "boost"):
            return f"{self.tag}({self.i})"
        if self.tag == "rotation":
            return f"rotation({self.i},{self.j})"
        return self.tag


def Dt() -> VectorFieldId:
    return VectorFieldId("dt")


def Dx(i: int) -> VectorFieldId:
    return VectorFieldId("dx", i)


def Boost(i: int) -> VectorFieldId:
    return VectorFieldId("boost", i)


def Rotation(i: int, j: int) -> VectorFieldId:
    if not i < j:
        raise ValueError("rotation indices require i < j")
    return VectorFieldId("rotation", i, j)


def Morawetz() -> VectorFieldId:
    return VectorFieldId("morawetz")


def Dtau() -> VectorFieldId:
    return VectorFieldId("dtau")


def Drho() -> VectorFieldId:
    return VectorFieldId("drho")


def _check_indices(vf: VectorFieldId, d: int) -> None:
    if vf.tag in ("dx", "boost") and not 1 <= vf.i <= d:
        raise ValueError(f"index {vf.i} out of range 1..{d}")
    if vf.tag == "rotation" and not (1 <= vf.i < vf.j <= d):
        raise ValueError(f"rotation indices ({vf.i},{vf.j}) out of range")


def vector_field(vf: VectorFieldId, p: SpacetimePoint) -> np.ndarray:
    """Rectangular coefficients (c_t, c_{x^1}, ..., c_{x^d}) of the field."""
    d = p.d
    _check_indices(vf, d)
    t, x, r = p.t, p.x, p.r
    c = np.zeros(d + 1)
    if vf.tag == "dt":
        c[0] = 1.0
    elif vf.tag == "dx":
        c[vf.i] = 1.0
    elif vf.tag == "boost":
        c[0] = x[vf.i - 1]
        c[vf.i] = t
    elif vf.tag == "rotation":
        c[vf.j] = x[vf.i - 1]
        c[vf.i] = -x[vf.j - 1]
    elif vf.tag == "morawetz":
        c[0] = t * t + r * r
        c[1:] = 2.0 * t * x
    elif vf.tag == "dtau":
        if p.t <= r:
            raise OutsideLightConeError("d_tau requires t > |x|")
        tau = math.sqrt(t * t - r * r)
        c[0] = t / tau
        c[1:] = x / tau
    elif vf.tag == "drho":
        if p.t <= r:
            raise OutsideLightConeError("d_rho requires t > |x|")
        if r == 0.0:
            raise SingularDirectionError("d_rho is singular at x = 0")
        c[0] = r
        c[1:] = t * x / r
    else:
        raise ValueError(f"unknown field tag {vf.tag!r}")
    return c


def _coeff_jacobian(vf: VectorFieldId, p: SpacetimePoint) -> np.ndarray:
    """jac[a, b] = d_a c_b for the fields appearing in commutator tables."""
    d = p.d
    jac = np.zeros((d + 1, d + 1))
    if vf.tag in ("dt", "dx"):
        return jac
    if vf.tag == "boost":
        jac[0, vf.i] = 1.0
        jac[vf.i, 0] = 1.0
        return jac
    if vf.tag == "rotation":
        jac[vf.i, vf.j] = 1.0
        jac[vf.j, vf.i] = -1.0
        return jac
    if vf.tag == "morawetz":
        jac[0, 0] = 2.0 * p.t
        jac[1:, 0] = 2.0 * p.x
        jac[0, 1:] = 2.0 * p.x
        jac[1:, 1:] = 2.0 * p.t * np.eye(d)
        return jac
    raise UnsupportedPairError(
        f"field {vf} has no tabulated coefficient jacobian")


def apply_field(vf: VectorFieldId, f: AnalyticTestFunction,
                p: SpacetimePoint) -> float:
    """Exact directional derivative: coefficients dotted with the gradient."""
    return float(vector_field(vf, p) @ f.grad(p.t, p.x))


def _apply_twist(f: AnalyticTestFunction, p: SpacetimePoint) -> float:
    """(K + (d-1) t) f: Morawetz derivative plus the zeroth-order twist."""
    return apply_field(Morawetz(), f, p) + (p.d - 1) * p.t * f.value(p.t, p.x)


def _compose(vf_a: VectorFieldId, twist_a: bool,
             vf_b: VectorFieldId, twist_b: bool,
             f: AnalyticTestFunction, p: SpacetimePoint) -> float:
    """Value of A(B f) at p when A, B are vector fields, optionally with the
    (d-1)t multiplication twist attached (only meaningful for Morawetz).

    Uses the analytic coefficient jacobians, so it is exact.
    """
    d = p.d
    grad = f.grad(p.t, p.x)
    hess = f.hess(p.t, p.x)
    ca = vector_field(vf_a, p)
    cb = vector_field(vf_b, p)
    jb = _coeff_jacobian(vf_b, p)
    # A acting on (B f) = sum_ab ca_a (d_a cb_b) d_b f + ca_a cb_b d_ab f
    val = float(ca @ jb @ grad) + float(ca @ hess @ cb)
    k = d - 1  # twist multiplier (d-1) t
    if twist_b:
        # A( k t f ) = k (A t) f + k t (A f)
        val += k * ca[0] * f.value(p.t, p.x) + k * p.t * float(ca @ grad)
    if twist_a:
        # remaining multiplication part of A: k t (B f)
        bf = float(cb @ grad)
        if twist_b:
            bf += k * p.t * f.value(p.t, p.x)
        val += k * p.t * bf
    return val


def _commutator_rhs(a: VectorFieldId, b: VectorFieldId, p: SpacetimePoint):
    """Tabulated RHS of [a, b] as a list of (scalar coefficient, field,
    twist flag) triples. ``Morawetz`` in the second slot stands for the
    twisted operator K + (d-1) t."""
    d = p.d
    t, x = p.t, p.x
    if a.tag == "boost" and b.tag == "boost":
        i, j = a.i, b.i
        if i == j:
            return []
        lo, hi, sgn = (i, j, 1.0) if i < j else (j, i, -1.0)
        return [(sgn, Rotation(lo, hi), False)]
    if a.tag == "rotation" and b.tag == "rotation":
        i, j, k, l = a.i, a.j, b.i, b.j
        # [O_ij, O_kl] = d_jk O_il - d_ik O_jl - d_jl O_ik + d_il O_jk
        out = []
        terms = [(1.0, j == k, i, l), (-1.0, i == k, j, l),
                 (-1.0, j == l, i, k), (1.0, i == l, j, k)]
        for sgn, hit, m, n in terms:
            if not hit or m == n:
                continue
            if m < n:
                out.append((sgn, Rotation(m, n), False))
            else:
                out.append((-sgn, Rotation(n, m), False))
        return out
    if a.tag == "boost" and b.tag == "rotation":
        # [L^i, O_kl] = d_ik L^l - d_il L^k
        out = []
        if a.i == b.i:
            out.append((1.0, Boost(b.j), False))
        if a.i == b.j:
            out.append((-1.0, Boost(b.i), False))
        return out
    if a.tag == "boost" and b.tag == "dt":
        return [(-1.0, Dx(a.i), False)]
    if a.tag == "boost" and b.tag == "dx":
        if a.i == b.i:
            return [(-1.0, Dt(), False)]
        return []
    if a.tag == "boost" and b.tag == "morawetz":
        # [L^i, K + (d-1) t] = (x^i / t)(K + (d-1) t) + (tau^2 / t) L^i
        tau2 = t * t - float(x @ x)
        return [(x[a.i - 1] / t, Morawetz(), True),
                (tau2 / t, Boost(a.i), False)]
    raise UnsupportedPairError(f"no tabulated identity for [{a}, {b}]")


def commutator_residual(a: VectorFieldId, b: VectorFieldId,
                        f: AnalyticTestFunction, p: SpacetimePoint,
                        relative: bool = False) -> float:
    """|[a, b] f - (tabulated RHS) f| at p, everything analytic.

    Pass ``b = Morawetz()`` with ``a`` a boost to check the twisted
    commutator [L^i, K + (d-1) t].  With ``relative=True`` the residual is
    normalized by max(1, |ab|, |ba|, |rhs|), which keeps roundoff from the
    large multiplier coefficients (K grows like t^2) from masquerading as an
    identity violation.
    """
    _check_indices(a, p.d)
    _check_indices(b, p.d)
    twist_b = (b.tag == "morawetz")
    rhs_terms = _commutator_rhs(a, b, p)  # may raise UnsupportedPairError
    ab = _compose(a, False, b, twist_b, f, p)
    ba = _compose(b, twist_b, a, False, f, p)
    rhs = 0.0
    for coeff, vf, twist in rhs_terms:
        term = apply_field(vf, f, p)
        if twist:
            term += (p.d - 1) * p.t * f.value(p.t, p.x)
        rhs += coeff * term
    res = abs(ab - ba - rhs)
    if relative:
        res /= max(1.0, abs(ab), abs(ba), abs(rhs))
    return res


# ---------------------------------------------------------------------------
# Quadratic-form identities
# ---------------------------------------------------------------------------

def _minkowski_pairing(u: np.ndarray, v: np.ndarray) -> float:
    return float(-u[0] * v[0] + u[1:] @ v[1:])


def _null_form_grad(grad: np.ndarray) -> float:
    return float(-grad[0] ** 2 + grad[1:] @ grad[1:])


def stress_energy(f: AnalyticTestFunction, p: SpacetimePoint,
                  X: np.ndarray, Y: np.ndarray) -> float:
    """Q(X, Y) = (X f)(Y f) - (1/2) eta(X, Y) eta(df, df)."""
    grad = f.grad(p.t, p.x)
    return (float(X @ grad) * float(Y @ grad)
            - 0.5 * _minkowski_pairing(X, Y) * _null_form_grad(grad))


def _rotation_squares(f: AnalyticTestFunction, p: SpacetimePoint) -> float:
    """sum_{i<j} (O_ij f)^2, which equals |d_theta f|^2 on the unit sphere."""
    total = 0.0
    for i in range(1, p.d + 1):
        for j in range(i + 1, p.d + 1):
            total += apply_field(Rotation(i, j), f, p) ** 2
    return total


def quadratic_form_residual(kind: str, f: AnalyticTestFunction,
                            p: SpacetimePoint,
                            relative: bool = False) -> float:
    """Residual of the pointwise tensor identities; for ``coercivity`` the
    returned value is signed and must be <= 0.

    Kinds: ``lid1``, ``lid2``, ``t_energy_density``, ``k_energy_density``,
    ``coercivity``.  All sides are expanded in rectangular derivatives; the
    chart-singular theta direction never appears explicitly.  With
    ``relative=True`` (no effect on ``coercivity``) the residual is
    normalized by max(1, |lhs|, |rhs|) so that the squared K-coefficients do
    not inflate pure roundoff.
    """

    def _norm(lhs, rhs):
        res = abs(lhs - rhs)
        return res / max(1.0, abs(lhs), abs(rhs)) if relative else res

    h = to_hyperboloidal(p)
    tau, rho = h.tau, h.rho
    boost_sq = sum(apply_field(Boost(i), f, p) ** 2
                   for i in range(1, p.d + 1))
    if kind in ("lid1", "lid2", "coercivity"):
        if p.r == 0.0:
            raise SingularDirectionError(
                f"{kind} uses d_rho; evaluate at x != 0")
        drho_f = apply_field(Drho(), f, p)
        rot_sq = _rotation_squares(f, p)
        sinh2 = math.sinh(rho) ** 2
        if kind == "lid1":
            rhs = drho_f ** 2 + (math.cosh(rho) ** 2 / sinh2) * rot_sq
            return _norm(boost_sq, rhs)
        if kind == "lid2":
            lhs = drho_f ** 2 + rot_sq / sinh2 + rot_sq
            return _norm(lhs, boost_sq)
        # coercivity: h_tau^{-1}(df, df) - tau^{-2} sum (L^i f)^2 <= 0
        h_inv = (drho_f ** 2 + rot_sq / sinh2) / tau ** 2
        return h_inv - boost_sq / tau ** 2
    if kind == "t_energy_density":
        dtau = vector_field(Dtau(), p)
        dt = vector_field(Dt(), p)
        lhs = stress_energy(f, p, dtau, dt)
        grad = f.grad(p.t, p.x)
        rhs = (boost_sq / (2.0 * tau ** 2 * math.cosh(rho))
               + grad[0] ** 2 / (2.0 * math.cosh(rho)))
        return _norm(lhs, rhs)
    if kind == "k_energy_density":
        dtau = vector_field(Dtau(), p)
        kvec = vector_field(Morawetz(), p)
        lhs = stress_energy(f, p, kvec, dtau)
        kf = apply_field(Morawetz(), f, p)
        rhs = (kf ** 2 / tau ** 2 + boost_sq) / (2.0 * math.cosh(rho))
        return _norm(lhs, rhs)
    raise ValueError(f"unknown identity kind {kind!r}")


def boost_on_hyperboloid(i: int, rho: float, theta: float,
                         d: int = 2) -> tuple[float, float]:
    """Chart coefficients (a, b) with L^i = a d_rho + b d_theta on a
    2-dimensional hyperboloid slice.

    L^1 = cos(th) d_rho - coth(rho) ... the exact forms are
    L^1 = cos(th) d_rho - (cosh/sinh) sin(th) d_theta,
    L^2 = sin(th) d_rho + (cosh/sinh) cos(th) d_theta.
    """
    if d != 2:
        raise ValueError("chart boosts are implemented for d = 2 only")
    if rho <= 0.0:
        raise SingularDirectionError("chart is singular at rho = 0")
    if i not in (1, 2):
        raise ValueError("boost index must be 1 or 2")
    c = math.cosh(rho) / math.sinh(rho)
    if i == 1:
        return math.cos(theta), -c * math.sin(theta)
    return math.sin(theta), c * math.cos(theta)
