"""Extraction of evolved data onto the hyperboloids tau = sqrt(t^2 - |x|^2)
and the associated energies, currents, and identity checks.

A slice is parameterized by the spatial grid x (each point contributes at
t*(x) = sqrt(tau^2 + |x|^2)) rather than by a (rho, theta) mesh; the volume
density transforms to dvol = dx / cosh(rho) with cosh(rho) = t*/tau.  The
twisted derivative K phi + t phi is always assembled from rectangular
K-coefficients, never through the polar chart, so rho = 0 is regular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import (CartesianGrid, EvolutionState, History, WindowError,
                   bicubic_many, gradient, laplacian)

__all__ = [
    "HyperboloidSlice",
    "EnergyBreakdown",
    "extract_slice",
    "SliceRecorder",
    "energy_E",
    "energy_F",
    "energy_breakdown",
    "tenergy_identity_check",
    "kenergy_identity_check",
    "divergence_check_K",
    "divergence_check_K_analytic",
    "sup_norms",
    "support_log_check",
    "synthetic_history",
    "SLICE_CSV_HEADER",
    "slice_csv_row",
]

D = 2  # all evolved data live on R^{1,2}


@dataclass
class HyperboloidSlice:
    """Evolved fields restricted to a tau-hyperboloid, x-parameterized.

    Arrays are flat over the covered in-cone grid points.  ``second`` holds
    the optional second-derivative fields (phi_xx, phi_xy, phi_yy, pi_x,
    pi_y, phi_tt) needed for once-commuted diagnostics.
    """

    tau: float
    h: float
    x: np.ndarray        # (N, 2)
    t_star: np.ndarray   # (N,)
    rho: np.ndarray
    cosh: np.ndarray     # t*/tau
    phi: np.ndarray
    pi: np.ndarray       # d_t phi
    gx: np.ndarray       # d_x1 phi
    gy: np.ndarray       # d_x2 phi
    coverage: float = 1.0      # covered fraction of the wanted radius range
    r_covered: float = np.inf  # outermost radius sampled
    r_wanted: float = np.inf   # outermost radius requested
    second: dict | None = None

    @property
    def r(self) -> np.ndarray:
        return np.hypot(self.x[:, 0], self.x[:, 1])

    @property
    def weight(self) -> np.ndarray:
        """dvol density per point: h^2 / cosh(rho)."""
        return self.h * self.h / self.cosh

    @property
    def L1(self) -> np.ndarray:
        return self.t_star * self.gx + self.x[:, 0] * self.pi

    @property
    def L2(self) -> np.ndarray:
        return self.t_star * self.gy + self.x[:, 1] * self.pi

    def K_phi(self) -> np.ndarray:
        t, r2 = self.t_star, self.r ** 2
        return ((t * t + r2) * self.pi
                + 2.0 * t * (self.x[:, 0] * self.gx + self.x[:, 1] * self.gy))

    @property
    def twist(self) -> np.ndarray:
        """(K + (d-1) t) phi with d = 2."""
        return self.K_phi() + self.t_star * self.phi

    def dtau_phi(self) -> np.ndarray:
        return (self.t_star * self.pi
                + self.x[:, 0] * self.gx + self.x[:, 1] * self.gy) / self.tau

    # -- once-commuted fields (require ``second``) --------------------------

    def _need_second(self):
        if self.second is None:
            raise ValueError("slice was extracted without second-order data")
        return self.second

    def dt_L(self, i: int) -> np.ndarray:
        """d_t L^i phi = d_i phi + t d_t d_i phi + x^i d_tt phi."""
        s = self._need_second()
        gi = (self.gx, self.gy)[i - 1]
        return (gi + self.t_star * s[f"pi_x{i}"]
                + self.x[:, i - 1] * s["phi_tt"])

    def grad_L(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Spatial gradient of L^i phi: d_j L^i = t d_ij + delta_ij pi + x^i d_t d_j."""
        s = self._need_second()
        t, xi = self.t_star, self.x[:, i - 1]
        hess = {(1, 1): s["phi_x1x1"], (1, 2): s["phi_x1x2"],
                (2, 1): s["phi_x1x2"], (2, 2): s["phi_x2x2"]}
        out = []
        for j in (1, 2):
            v = t * hess[(i, j)] + xi * s[f"pi_x{j}"]
            if i == j:
                v = v + self.pi
            out.append(v)
        return out[0], out[1]

    def LL(self, j: int, i: int) -> np.ndarray:
        """L^j L^i phi."""
        gL1, gL2 = self.grad_L(i)
        gLj = (gL1, gL2)[j - 1]
        return self.t_star * gLj + self.x[:, j - 1] * self.dt_L(i)

    def twist_L(self, i: int) -> np.ndarray:
        """(K + t) L^i phi."""
        t, r2 = self.t_star, self.r ** 2
        gL1, gL2 = self.grad_L(i)
        Li = (self.L1, self.L2)[i - 1]
        return ((t * t + r2) * self.dt_L(i)
                + 2.0 * t * (self.x[:, 0] * gL1 + self.x[:, 1] * gL2)
                + t * Li)


@dataclass
class EnergyBreakdown:
    E_term_boost: float
    E_term_dt: float
    F_term_boost: float
    F_term_twist: float

    @property
    def E2(self) -> float:
        return self.E_term_boost + self.E_term_dt

    @property
    def F2(self) -> float:
        return self.F_term_boost + self.F_term_twist

    @property
    def E(self) -> float:
        return math.sqrt(max(self.E2, 0.0))

    @property
    def F(self) -> float:
        return math.sqrt(max(self.F2, 0.0))


# ---------------------------------------------------------------------------
# Sampling core
# ---------------------------------------------------------------------------

def _hermite_w(s: np.ndarray, dt: float):
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00, h10 * dt, h01, h11 * dt


def _hermite_w_dt(s: np.ndarray, dt: float):
    return (6 * s * (s - 1) / dt, (1 - s) * (1 - 3 * s),
            -6 * s * (s - 1) / dt, s * (3 * s - 2))


def _phi_tt_array(state: EvolutionState, kind_tag: str) -> np.ndarray:
    """d_tt phi on a snapshot, reconstructed from the evolution equation."""
    key = f"phi_tt:{kind_tag}"
    if key not in state._cache:
        lap = state.derived("lap_phi")
        if kind_tag == "WaveMap":
            gx = state.derived("phi_x")
            gy = state.derived("phi_y")
            nl = state.phi * (-state.pi ** 2 + gx ** 2 + gy ** 2)
            state._cache[key] = lap + nl
        else:
            # Linear; Perturbation backgrounds are only consumed linearly
            # in diagnostics (their own runs carry the tag)
            state._cache[key] = lap
    return state._cache[key]


def _sample_bracket(s0: EvolutionState, s1: EvolutionState,
                    tq: np.ndarray, xq: np.ndarray, yq: np.ndarray,
                    second_order: bool, kind_tag: str) -> dict:
    """Sample (phi, pi, grad phi[, second derivatives]) at points with
    times inside [s0.t, s1.t], vectorized."""
    g = s0.grid
    dt = s1.t - s0.t
    s = (tq - s0.t) / dt
    wv = _hermite_w(s, dt)
    wd = _hermite_w_dt(s, dt)

    def pair(f0, g0, f1, g1, dx=False, dy=False):
        vals = [bicubic_many(a, g, xq, yq, dx, dy) for a in (f0, g0, f1, g1)]
        return vals

    def mix(w, v):
        return w[0] * v[0] + w[1] * v[1] + w[2] * v[2] + w[3] * v[3]

    base = pair(s0.phi, s0.pi, s1.phi, s1.pi)
    out = {
        "phi": mix(wv, base),
        "pi": mix(wd, base),
        "gx": mix(wv, pair(s0.phi, s0.pi, s1.phi, s1.pi, dx=True)),
        "gy": mix(wv, pair(s0.phi, s0.pi, s1.phi, s1.pi, dy=True)),
    }
    if second_order:
        x0, y0 = s0.derived("phi_x"), s0.derived("phi_y")
        px0, py0 = s0.derived("pi_x"), s0.derived("pi_y")
        x1, y1 = s1.derived("phi_x"), s1.derived("phi_y")
        px1, py1 = s1.derived("pi_x"), s1.derived("pi_y")
        xpair = pair(x0, px0, x1, px1)
        ypair = pair(y0, py0, y1, py1)
        out["pi_x1"] = mix(wd, xpair)
        out["pi_x2"] = mix(wd, ypair)
        out["phi_x1x1"] = mix(wv, pair(x0, px0, x1, px1, dx=True))
        out["phi_x1x2"] = mix(wv, pair(x0, px0, x1, px1, dy=True))
        out["phi_x2x2"] = mix(wv, pair(y0, py0, y1, py1, dy=True))
        tt0 = _phi_tt_array(s0, kind_tag)
        tt1 = _phi_tt_array(s1, kind_tag)
        out["phi_tt"] = mix(wd, pair(s0.pi, tt0, s1.pi, tt1))
    return out


_SECOND_KEYS = ("pi_x1", "pi_x2", "phi_x1x1", "phi_x1x2", "phi_x2x2",
                "phi_tt")


def _wanted_radius(tau: float, grid: CartesianGrid,
                   r_max: float | None) -> float:
    """Outermost radius worth sampling: support bound (unit-ball data can
    reach r = t* - 1, i.e. r = (tau^2 - 1)/2 on the slice) clipped to the
    grid's inscribed circle, or an explicit override."""
    if r_max is not None:
        return min(r_max, grid.R)
    support = (tau * tau - 1.0) / 2.0 + 2.0 * grid.h
    return min(support, grid.R)


def _assemble(tau, grid, xs, ys, ts, fields, r_covered, r_wanted,
              second_order):
    x = np.column_stack([xs, ys])
    cosh = ts / tau
    rho = np.arccosh(np.maximum(cosh, 1.0))
    second = ({k: fields[k] for k in _SECOND_KEYS} if second_order else None)
    cov = 1.0 if r_wanted <= 0 else min(1.0, r_covered / r_wanted)
    return HyperboloidSlice(
        tau=tau, h=grid.h, x=x, t_star=ts, rho=rho, cosh=cosh,
        phi=fields["phi"], pi=fields["pi"], gx=fields["gx"],
        gy=fields["gy"], coverage=cov, r_covered=r_covered,
        r_wanted=r_wanted, second=second)


def extract_slice(hist: History, tau: float, *, second_order: bool = False,
                  r_max: float | None = None,
                  strict: bool = False) -> HyperboloidSlice:
    """Post-hoc slice extraction from a fully retained History.

    Points with t*(x) beyond the retained window are clipped unless
    ``strict``; the clip is reported through ``coverage``/``r_covered``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    g = hist.grid
    t0, t1 = hist.window()
    if tau < t0 - 1e-9:
        raise WindowError(
            f"slice tau={tau} needs t down to {tau}, window starts at {t0}")
    r_wanted = _wanted_radius(tau, g, r_max)
    t_needed = math.hypot(tau, r_wanted)
    if strict and t_needed > t1 + 1e-9:
        raise WindowError(
            f"slice tau={tau} needs t up to {t_needed:.3f}, window ends "
            f"at {t1}")
    r_cov = (math.sqrt(max(t1 * t1 - tau * tau, 0.0))
             if t_needed > t1 else r_wanted)

    X, Y = g.mesh()
    rr = g.radius()
    mask = rr <= min(r_wanted, r_cov)
    xs, ys = X[mask], Y[mask]
    ts = np.sqrt(tau * tau + xs ** 2 + ys ** 2)
    keep = (ts >= t0 - 1e-12) & (ts <= t1 + 1e-12)
    xs, ys, ts = xs[keep], ys[keep], ts[keep]

    kind_tag = getattr(hist, "kind_tag", "Linear")
    states = list(hist.states)
    tgrid = np.array([st.t for st in states])
    order = np.argsort(ts, kind="stable")
    xs, ys, ts = xs[order], ys[order], ts[order]
    bracket_idx = np.clip(np.searchsorted(tgrid, ts, side="right") - 1,
                          0, len(states) - 2)
    parts = []
    for k in np.unique(bracket_idx):
        sel = bracket_idx == k
        parts.append((sel, _sample_bracket(states[k], states[k + 1],
                                           ts[sel], xs[sel], ys[sel],
                                           second_order, kind_tag)))
    n = ts.size
    keys = ["phi", "pi", "gx", "gy"] + (list(_SECOND_KEYS)
                                        if second_order else [])
    fields = {k: np.zeros(n) for k in keys}
    for sel, part in parts:
        for k in keys:
            fields[k][sel] = part[k]
    return _assemble(tau, g, xs, ys, ts, fields,
                     min(r_cov, r_wanted), r_wanted, second_order)


class SliceRecorder:
    """History observer that extracts hyperboloid slices progressively.

    Attach via evolve(..., observers=(recorder,)); each time a new output
    state is published, all slice points whose t* falls in the newest
    bracket are sampled, so a short ring-buffer retention suffices.  Call
    ``finalize()`` after the run for the assembled slices.
    """

    def __init__(self, taus, *, second_order: bool = False,
                 r_max: float | None = None, kind_tag: str | None = None):
        self.taus = sorted(taus)
        self.second_order = second_order
        self.r_max = r_max
        self.kind_tag = kind_tag
        self._acc = {tau: [] for tau in self.taus}
        self._grid = None
        self._t_last = None

    def on_state(self, hist: History, state: EvolutionState) -> None:
        states = hist.states
        if len(states) < 2:
            self._grid = hist.grid
            self._t_last = state.t
            return
        s0, s1 = states[-2], states[-1]
        self._grid = hist.grid
        self._t_last = s1.t
        kind_tag = self.kind_tag or getattr(hist, "kind_tag", "Linear")
        g = hist.grid
        first = len(states) == 2
        for tau in self.taus:
            if tau > s1.t:
                continue
            r_wanted = _wanted_radius(tau, g, self.r_max)
            lo = max(s0.t, tau) if first else s0.t
            r_lo = math.sqrt(max(lo * lo - tau * tau, 0.0))
            r_hi = math.sqrt(max(s1.t * s1.t - tau * tau, 0.0))
            r_hi = min(r_hi, r_wanted)
            if r_hi <= 0 or r_lo >= r_wanted:
                continue
            X, Y = g.mesh()
            rr = g.radius()
            sel = (rr <= r_hi) & ((rr > r_lo) if not first else (rr >= 0))
            if first:
                sel = rr <= r_hi
            else:
                sel = (rr > r_lo) & (rr <= r_hi)
            if not sel.any():
                continue
            xs, ys = X[sel], Y[sel]
            ts = np.sqrt(tau * tau + xs ** 2 + ys ** 2)
            inside = (ts >= s0.t - 1e-12) & (ts <= s1.t + 1e-12)
            xs, ys, ts = xs[inside], ys[inside], ts[inside]
            if ts.size == 0:
                continue
            fields = _sample_bracket(s0, s1, ts, xs, ys,
                                     self.second_order, kind_tag)
            self._acc[tau].append((xs, ys, ts, fields))

    def finalize(self) -> dict[float, HyperboloidSlice]:
        out = {}
        for tau in self.taus:
            chunks = self._acc[tau]
            g = self._grid
            r_wanted = _wanted_radius(tau, g, self.r_max)
            if not chunks:
                continue
            xs = np.concatenate([c[0] for c in chunks])
            ys = np.concatenate([c[1] for c in chunks])
            ts = np.concatenate([c[2] for c in chunks])
            keys = chunks[0][3].keys()
            fields = {k: np.concatenate([c[3][k] for c in chunks])
                      for k in keys}
            r_cov = math.sqrt(max(self._t_last ** 2 - tau * tau, 0.0))
            out[tau] = _assemble(tau, g, xs, ys, ts, fields,
                                 min(r_cov, r_wanted), r_wanted,
                                 self.second_order)
        return out


# ---------------------------------------------------------------------------
# Energies and identity checks
# ---------------------------------------------------------------------------

def energy_breakdown(sl: HyperboloidSlice) -> EnergyBreakdown:
    w = sl.weight
    boost_sq = sl.L1 ** 2 + sl.L2 ** 2
    tau2 = sl.tau ** 2
    return EnergyBreakdown(
        E_term_boost=float(np.sum(boost_sq / (tau2 * sl.cosh) * w)),
        E_term_dt=float(np.sum(sl.pi ** 2 / sl.cosh * w)),
        F_term_boost=float(np.sum(boost_sq / sl.cosh * w)),
        F_term_twist=float(np.sum(sl.twist ** 2 / (tau2 * sl.cosh) * w)),
    )


energy_E = energy_breakdown
energy_F = energy_breakdown


def tenergy_identity_check(sl: HyperboloidSlice) -> float:
    """Pointwise residual of the energy-density factorization: the stress
    tensor contracted with (d_tau, d_t) equals
    (1/(2 tau^2 cosh)) sum (L^i phi)^2 + (1/(2 cosh)) (d_t phi)^2."""
    null = -sl.pi ** 2 + sl.gx ** 2 + sl.gy ** 2
    dtau = sl.dtau_phi()
    # eta(d_tau, d_t) = -t*/tau = -cosh
    lhs = dtau * sl.pi + 0.5 * sl.cosh * null
    rhs = ((sl.L1 ** 2 + sl.L2 ** 2) / (2 * sl.tau ** 2 * sl.cosh)
           + sl.pi ** 2 / (2 * sl.cosh))
    return float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0


def kenergy_identity_check(sl: HyperboloidSlice) -> float:
    """Relative residual of the integrated conformal-energy identity.

    LHS integrand: Q(K, d_tau) + t phi d_tau(phi) - (1/2) cosh phi^2
    (d = 2); RHS integrand: (1/(2 cosh)) sum (L^i phi)^2
    + (1/(2 tau^2 cosh)) (K phi + t phi)^2.  Equality holds only after the
    rho-boundary term is integrated away, hence compact support on the
    slice is required (support must not reach r_covered).
    """
    w = sl.weight
    null = -sl.pi ** 2 + sl.gx ** 2 + sl.gy ** 2
    dtau = sl.dtau_phi()
    Kphi = sl.K_phi()
    # eta(K, d_tau) = -t tau (both in rectangular components)
    q_K_dtau = Kphi * dtau + 0.5 * sl.t_star * sl.tau * null
    lhs_density = (q_K_dtau + sl.t_star * sl.phi * dtau
                   - 0.5 * sl.cosh * sl.phi ** 2)
    rhs_density = ((sl.L1 ** 2 + sl.L2 ** 2) / (2 * sl.cosh)
                   + sl.twist ** 2 / (2 * sl.tau ** 2 * sl.cosh))
    lhs = float(np.sum(lhs_density * w))
    rhs = float(np.sum(rhs_density * w))
    scale = max(abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale


def sup_norms(sl: HyperboloidSlice) -> dict[str, float]:
    """Sup norms of the tracked fields, raw and with tau / (tau/ln tau)
    weights."""
    ln_tau = math.log(sl.tau) if sl.tau > 1 else 1.0
    base = {
        "dt_phi": float(np.max(np.abs(sl.pi), initial=0.0)),
        "L_phi": float(max(np.max(np.abs(sl.L1), initial=0.0),
                           np.max(np.abs(sl.L2), initial=0.0))),
        "twist_phi": float(np.max(np.abs(sl.twist), initial=0.0)),
        "phi": float(np.max(np.abs(sl.phi), initial=0.0)),
    }
    out = dict(base)
    for k, v in base.items():
        out[k + "_x_tau"] = v * sl.tau
        out[k + "_x_tau_over_logtau"] = v * sl.tau / ln_tau
    return out


def support_log_check(sl: HyperboloidSlice, rel_threshold: float = 1e-10
                      ) -> dict:
    """On compact-unit-ball-data runs the support obeys ln(tau) >= rho.

    Returns the largest rho carrying a non-negligible record and the slack
    ln(tau) - rho_max (positive = satisfied); discretization is absorbed by
    an h-sized tolerance at the caller.
    """
    amp = np.abs(sl.phi)
    m = float(np.max(amp, initial=0.0))
    if m == 0.0:
        return {"tau": sl.tau, "rho_max": 0.0,
                "slack": math.log(sl.tau), "ok": True}
    nz = amp > rel_threshold * m
    rho_max = float(np.max(sl.rho[nz], initial=0.0))
    slack = math.log(sl.tau) - rho_max
    return {"tau": sl.tau, "rho_max": rho_max, "slack": slack,
            "ok": slack >= -sl.h}


# ---------------------------------------------------------------------------
# Divergence of the conformal current
# ---------------------------------------------------------------------------

def _current_K_arrays(state: EvolutionState) -> tuple[np.ndarray, ...]:
    """Rectangular components (k_t, k_x, k_y) of the conformal current
    Q_ab K^b + (1/2) t d_a(phi^2) - (1/2) phi^2 d_a(t)  (d = 2)."""
    g = state.grid
    X, Y = g.mesh()
    t = state.t
    phi, pi = state.phi, state.pi
    gx, gy = state.derived("phi_x"), state.derived("phi_y")
    null = -pi ** 2 + gx ** 2 + gy ** 2
    Kt = t * t + X ** 2 + Y ** 2
    Kx, Ky = 2 * t * X, 2 * t * Y
    q_tt = pi * pi + 0.5 * null
    q_tx, q_ty = pi * gx, pi * gy
    q_xx = gx * gx - 0.5 * null
    q_yy = gy * gy - 0.5 * null
    q_xy = gx * gy
    k_t = q_tt * Kt + q_tx * Kx + q_ty * Ky + t * phi * pi - 0.5 * phi ** 2
    k_x = q_tx * Kt + q_xx * Kx + q_xy * Ky + t * phi * gx
    k_y = q_ty * Kt + q_xy * Kx + q_yy * Ky + t * phi * gy
    return k_t, k_x, k_y


def divergence_check_K(hist: History, *, r_max: float | None = None) -> dict:
    """Finite-difference check that the conformal current's spacetime
    divergence equals box(phi) [K phi + t phi] over the stored history.

    Uses centered time differences across output levels and the standard
    spatial stencils; box(phi) is evaluated from the evolution equation
    (zero residual target for Linear runs).  Returns the max residual over
    the interior region.
    """
    states = list(hist.states)
    if len(states) < 3:
        raise WindowError("need at least three stored states")
    kind_tag = getattr(hist, "kind_tag", "Linear")
    g = hist.grid
    X, Y = g.mesh()
    rr = g.radius()
    r_lim = r_max if r_max is not None else g.R - 4 * g.h
    worst = 0.0
    for k in range(1, len(states) - 1):
        sm, s0, sp = states[k - 1], states[k], states[k + 1]
        dt = (sp.t - sm.t) / 2.0
        ktm, _, _ = _current_K_arrays(sm)
        kt0, kx0, ky0 = _current_K_arrays(s0)
        ktp, _, _ = _current_K_arrays(sp)
        d_t = (ktp - ktm) / (2.0 * dt)
        d_x = np.gradient(kx0, g.h, axis=0, edge_order=2)
        d_y = np.gradient(ky0, g.h, axis=1, edge_order=2)
        div = -d_t + d_x + d_y
        if kind_tag == "WaveMap":
            gx, gy = s0.derived("phi_x"), s0.derived("phi_y")
            box = s0.phi * (-s0.pi ** 2 + gx ** 2 + gy ** 2)
        else:
            box = np.zeros_like(s0.phi)
        t = s0.t
        Kphi = ((t * t + X ** 2 + Y ** 2) * s0.pi
                + 2 * t * (X * s0.derived("phi_x") + Y * s0.derived("phi_y")))
        rhs = box * (Kphi + t * s0.phi)
        res = np.abs(div - rhs)
        worst = max(worst, float(np.max(res[rr <= r_lim], initial=0.0)))
    return {"max_residual": worst, "levels": len(states) - 2,
            "kind": kind_tag}


def divergence_check_K_analytic(f, points) -> float:
    """Exact-derivative version of the divergence identity on an analytic
    test function: eta^{ab} d_b(current_a) - box(f)[K f + t f], max over
    points (t, x)."""
    eta = np.diag([-1.0, 1.0, 1.0])
    worst = 0.0
    for (t, x) in points:
        x = np.asarray(x, dtype=float)
        y = np.concatenate(([t], x))
        grad = f.grad(t, x)
        hess = f.hess(t, x)
        val = f.value(t, x)
        Ku = np.array([t * t + x @ x, 2 * t * x[0], 2 * t * x[1]])
        dK = np.array([[2 * t, 2 * x[0], 2 * x[1]],
                       [2 * x[0], 2 * t, 0.0],
                       [2 * x[1], 0.0, 2 * t]])  # dK[b, c] = d_b K^c
        null = grad @ eta @ grad
        Q = np.outer(grad, grad) - 0.5 * eta * null
        # d_b Q_{ac} = H_{ba} g_c + g_a H_{bc} - eta_{ac} (g^T eta H_b);
        # eta is diagonal so only b = a survives the eta^{ab} contraction
        div = 0.0
        for a in range(3):
            sgn = eta[a, a]
            b = a
            d_b_k_a = 0.0
            for c in range(3):
                dQ = (hess[b, a] * grad[c] + grad[a] * hess[b, c]
                      - eta[a, c] * (grad @ eta @ hess[b]))
                d_b_k_a += dQ * Ku[c] + Q[a, c] * dK[b, c]
            # + (1/2) d_b [ t d_a(f^2) ] - (1/2) d_b [ f^2 delta_a^t ]
            d_b_k_a += ((1.0 if b == 0 else 0.0) * val * grad[a]
                        + t * (grad[b] * grad[a] + val * hess[b, a]))
            if a == 0:
                d_b_k_a -= val * grad[b]
            div += sgn * d_b_k_a
        box = -hess[0, 0] + hess[1, 1] + hess[2, 2]
        Kf = Ku @ grad
        worst = max(worst, abs(div - box * (Kf + t * val)))
        _ = y
    return worst


# ---------------------------------------------------------------------------
# Synthetic histories for oracles, CSV plumbing
# ---------------------------------------------------------------------------

def synthetic_history(phi_fn, pi_fn, grid: CartesianGrid, t0: float,
                      dt_out: float, n_levels: int,
                      kind_tag: str = "Linear") -> History:
    """History built from closed-form phi(t, X, Y) and d_t phi(t, X, Y)."""
    hist = History(grid, dt_out=dt_out)
    hist.kind_tag = kind_tag
    X, Y = grid.mesh()
    for k in range(n_levels):
        t = t0 + k * dt_out
        hist.append(EvolutionState(t, grid,
                                   np.asarray(phi_fn(t, X, Y), dtype=float)
                                   + np.zeros_like(X),
                                   np.asarray(pi_fn(t, X, Y), dtype=float)
                                   + np.zeros_like(X)))
    return hist


SLICE_CSV_HEADER = (
    "tau,coverage,E_term_boost,E_term_dt,E2,F_term_boost,F_term_twist,F2,"
    "sup_dt_phi,sup_L_phi,sup_twist_phi,sup_phi,"
    "sup_dt_phi_x_tau,sup_L_phi_x_tau,sup_twist_phi_x_tau,"
    "sup_phi_x_tau_over_logtau"
)


def slice_csv_row(sl: HyperboloidSlice) -> str:
    eb = energy_breakdown(sl)
    s = sup_norms(sl)
    vals = [sl.tau, sl.coverage, eb.E_term_boost, eb.E_term_dt, eb.E2,
            eb.F_term_boost, eb.F_term_twist, eb.F2,
            s["dt_phi"], s["L_phi"], s["twist_phi"], s["phi"],
            s["dt_phi_x_tau"], s["L_phi_x_tau"], s["twist_phi_x_tau"],
            s["phi_x_tau_over_logtau"]]
    return ",".join(f"{v:.12g}" for v in vals)
