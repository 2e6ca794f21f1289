"""Method-of-lines evolution of the 2+1 semilinear wave equation.

Solves box(phi) = N(phi, dphi) with classical RK4 in time and 2nd-order
centered stencils in space.  Supported right-hand sides:

* Linear:        N = 0
* WaveMap:       N = phi * (-(d_t phi)^2 + |grad phi|^2)
* Perturbation:  N = (Phi+phi) eta(d(Phi+phi), d(Phi+phi)) - Phi eta(dPhi, dPhi)
  with a fixed background Phi sampled from a stored History.

Also houses the dyadic machinery: the scaling operators
S_m phi(t, x) = phi(2^m (t-2) + 2, 2^m x), the annular decomposition of
initial data, and the stage-by-stage cascade that reassembles the solution
to the full problem from rescaled compactly-supported pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import kernels
from .grid import (CartesianGrid, EvolutionState, History, WindowError,
                   bicubic_many, gradient, laplacian, sample_spacetime)

__all__ = [
    "BlowupError",
    "NonlinearityKind",
    "InitialDataSpec",
    "SolverConfig",
    "flat_energy",
    "null_form",
    "rhs",
    "step_rk4",
    "evolve",
    "chi0",
    "rescale_Sm",
    "rescale_Sm_data",
    "dyadic_decompose",
    "cascade",
    "CascadeResult",
    "scaling_identity_residuals",
    "tau_comparability_check",
]


class BlowupError(RuntimeError):
    """Solution exceeded the blowup threshold or became non-finite."""

    def __init__(self, t: float, max_abs: float, stage: int | None = None):
        self.t = t
        self.max_abs = max_abs
        self.stage = stage
        where = f" (cascade stage {stage})" if stage is not None else ""
        super().__init__(f"blowup at t={t:.6g}, max|phi|={max_abs:.6g}{where}")


@dataclass(frozen=True)
class NonlinearityKind:
    """Linear, WaveMap, or Perturbation against a fixed background."""

    tag: str
    background: object | None = None  # History-like: sample(t, X, Y, deriv)

    @staticmethod
    def linear() -> "NonlinearityKind":
        return NonlinearityKind("Linear")

    @staticmethod
    def wave_map() -> "NonlinearityKind":
        return NonlinearityKind("WaveMap")

    @staticmethod
    def perturbation(background) -> "NonlinearityKind":
        return NonlinearityKind("Perturbation", background)


@dataclass(frozen=True)
class InitialDataSpec:
    """Compactly supported C^inf Cauchy data at t = 2.

    profile: "bump" (radial bump in phi, zero velocity), "bumpDerivative"
    (zero phi, radial bump velocity), "annular" (annulus [2^{m-2}, 2^m]
    piece of a bump), or "gaussian_tail" (bump-localized but spread) —
    amplitude scales both components.
    """

    amplitude: float
    profile: str = "bump"
    support_radius: float = 1.0
    m: int = 0

    def __post_init__(self):
        if self.profile not in ("bump", "bumpDerivative", "annular",
                                "gaussian_tail"):
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.profile == "bump" and self.support_radius > 1.0 + 1e-12:
            raise ValueError("bump data must fit in the unit ball")

    def realize(self, grid: CartesianGrid) -> tuple[np.ndarray, np.ndarray]:
        return self.evaluate(*grid.mesh())

    def as_functions(self):
        """(phi0_fn, pi0_fn) callables over coordinate arrays (X, Y)."""
        return (lambda X, Y: self.evaluate(X, Y)[0],
                lambda X, Y: self.evaluate(X, Y)[1])

    def evaluate(self, X, Y) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        r = np.hypot(X, Y)
        if self.profile == "bump":
            f = self.amplitude * _radial_bump(r / self.support_radius)
            return f, np.zeros_like(f)
        if self.profile == "bumpDerivative":
            f = self.amplitude * _radial_bump(r / self.support_radius)
            return np.zeros_like(f), f
        if self.profile == "gaussian_tail":
            # Gaussian-looking profile, but cut off smoothly so the data
            # stay compactly supported inside radius support_radius.
            f = (self.amplitude * np.exp(-(r / (0.3 * self.support_radius))**2)
                 * chi0(r / self.support_radius))
            return f, np.zeros_like(f)
        # annular: annulus piece m of a wide bump
        base = self.amplitude * _radial_bump(r / self.support_radius)
        if self.m == 0:
            w = chi0(r)
        else:
            w = chi0(r / 2.0**self.m) - chi0(r / 2.0**(self.m - 1))
        return base * w, np.zeros_like(base)


def _radial_bump(s: np.ndarray) -> np.ndarray:
    """exp(-1/(1-s^2)) normalized to 1 at s=0; identically 0 for |s| >= 1."""
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


def chi0(s):
    """Smooth radial cutoff: 1 on [0, 1/2], 0 on [1, inf), monotone between.

    Built from the standard smooth step g(u) = e(u) / (e(u) + e(1-u)) with
    e(u) = exp(-1/u) for u > 0.
    """
    s = np.abs(np.asarray(s, dtype=float))
    scalar = s.ndim == 0
    s = np.atleast_1d(s)
    out = np.zeros_like(s)
    out[s <= 0.5] = 1.0
    mid = (s > 0.5) & (s < 1.0)
    u = 2.0 * (1.0 - s[mid])  # 1 at s=1/2 -> 0 at s=1
    e1 = np.exp(-1.0 / u)
    e2 = np.exp(-1.0 / (1.0 - u))
    out[mid] = e1 / (e1 + e2)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class SolverConfig:
    R: float
    n: int
    cfl: float = 0.5
    t_end: float = 20.0
    dt_out: float | None = None  # None: snap to ~0.1, integer multiple of dt
    t_start: float = 2.0
    blowup_factor: float = 1e3
    retain: int | None = None

    def __post_init__(self):
        if not (0 < self.cfl <= 1):
            raise ValueError("cfl must be in (0, 1]")

    @property
    def grid(self) -> CartesianGrid:
        return CartesianGrid(self.R, self.n)

    @property
    def dt(self) -> float:
        return self.cfl * self.grid.h / math.sqrt(2.0)

    def output_stride(self) -> int:
        target = self.dt_out if self.dt_out is not None else 0.1
        return max(1, round(target / self.dt))


def flat_energy(state: EvolutionState) -> float:
    """Discrete flat-slice energy 1/2 sum (pi^2 + |D+ phi|^2) h^2.

    Uses forward differences, the gradient compatible with the 5-point
    Laplacian (summation by parts), so the semi-discrete linear flow
    conserves this exactly; any drift is pure time-integration error.
    """
    h = state.grid.h
    dx = (state.phi[1:, :] - state.phi[:-1, :]) / h
    dy = (state.phi[:, 1:] - state.phi[:, :-1]) / h
    return float(0.5 * h * h * (np.sum(state.pi ** 2)
                                + np.sum(dx ** 2) + np.sum(dy ** 2)))


def null_form(pi, grad) -> float:
    """The Minkowski null form eta(dphi, dphi) = -pi^2 + |grad|^2."""
    gx, gy = grad
    return -pi * pi + gx * gx + gy * gy


def _perturbation_term(phi, pi, gx, gy, bg_phi, bg_pi, bg_gx, bg_gy):
    """N = (Phi+phi) eta(d(Phi+phi)) - Phi eta(dPhi), expanded so the
    subtraction is exact when phi = 0."""
    tp = bg_phi + phi
    full = tp * (-(bg_pi + pi) ** 2 + (bg_gx + gx) ** 2 + (bg_gy + gy) ** 2)
    base = bg_phi * (-bg_pi**2 + bg_gx**2 + bg_gy**2)
    return full - base


def _rhs_arrays(t, phi, pi, h, kind: NonlinearityKind, grid: CartesianGrid,
                out_dpi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if kind.tag == "Linear":
        kernels.rhs_linear(phi, pi, h, out_dpi)
    elif kind.tag == "WaveMap":
        kernels.rhs_wavemap(phi, pi, h, out_dpi)
    elif kind.tag == "Perturbation":
        out_dpi[...] = laplacian(phi, h)
        gx, gy = gradient(phi, h)
        bg = kind.background
        bphi, bpi, bgx, bgy = bg.sample_fields(t, grid)
        out_dpi += _perturbation_term(phi, pi, gx, gy, bphi, bpi, bgx, bgy)
    else:
        raise ValueError(f"unknown nonlinearity {kind.tag!r}")
    return pi, out_dpi


def rhs(state: EvolutionState, kind: NonlinearityKind):
    """(dphi/dt, dpi/dt) for the first-order system."""
    out = np.empty_like(state.pi)
    dphi, dpi = _rhs_arrays(state.t, state.phi, state.pi, state.grid.h,
                            kind, state.grid, out)
    return dphi.copy(), dpi


def step_rk4(state: EvolutionState, dt: float,
             kind: NonlinearityKind) -> EvolutionState:
    """One classical 4-stage Runge-Kutta step."""
    g, h, t = state.grid, state.grid.h, state.t
    phi, pi = state.phi, state.pi
    k_dpi = np.empty_like(pi)

    _, d1 = _rhs_arrays(t, phi, pi, h, kind, g, k_dpi)
    k1_phi, k1_pi = pi.copy(), d1.copy()

    _, d2 = _rhs_arrays(t + dt / 2, phi + dt / 2 * k1_phi,
                        pi + dt / 2 * k1_pi, h, kind, g, k_dpi)
    k2_phi, k2_pi = pi + dt / 2 * k1_pi, d2.copy()

    _, d3 = _rhs_arrays(t + dt / 2, phi + dt / 2 * k2_phi,
                        pi + dt / 2 * k2_pi, h, kind, g, k_dpi)
    k3_phi, k3_pi = pi + dt / 2 * k2_pi, d3.copy()

    _, d4 = _rhs_arrays(t + dt, phi + dt * k3_phi,
                        pi + dt * k3_pi, h, kind, g, k_dpi)
    k4_phi, k4_pi = pi + dt * k3_pi, d4

    new_phi = phi + dt / 6 * (k1_phi + 2 * k2_phi + 2 * k3_phi + k4_phi)
    new_pi = pi + dt / 6 * (k1_pi + 2 * k2_pi + 2 * k3_pi + k4_pi)
    return EvolutionState(t + dt, g, new_phi, new_pi)


def evolve(init: InitialDataSpec | tuple, cfg: SolverConfig,
           kind: NonlinearityKind | None = None,
           observers: tuple = (), stage: int | None = None) -> History:
    """Run the evolution and return the History at cadence dt_out.

    ``init`` may be an InitialDataSpec or a raw (phi, pi) array pair already
    on cfg's grid.  Observers are attached to the History before the first
    state is published, so they see every output level as it appears.
    """
    kind = kind or NonlinearityKind.linear()
    g = cfg.grid
    if isinstance(init, InitialDataSpec):
        phi0, pi0 = init.realize(g)
    else:
        phi0, pi0 = (np.asarray(a, dtype=float) for a in init)
    state = EvolutionState(cfg.t_start, g, phi0, pi0)

    initial_max = max(state.max_abs_phi(), float(np.max(np.abs(pi0))), 1e-300)
    threshold = cfg.blowup_factor * initial_max

    stride = cfg.output_stride()
    dt = cfg.dt
    hist = History(g, dt_out=stride * dt, retain=cfg.retain)
    hist.kind_tag = kind.tag  # lets diagnostics reconstruct d_tt phi
    for obs in observers:
        hist.add_observer(obs)
    hist.append(state)

    n_steps = math.ceil((cfg.t_end - cfg.t_start) / dt - 1e-9)
    n_steps = ((n_steps + stride - 1) // stride) * stride  # land on cadence
    for k in range(1, n_steps + 1):
        state = step_rk4(state, dt, kind)
        m = state.max_abs_phi()
        if not np.isfinite(m) or m > threshold:
            raise BlowupError(state.t, m, stage)
        if k % stride == 0:
            # re-stamp t to the exact cadence to avoid drift in History
            state = EvolutionState(cfg.t_start + k * dt, g, state.phi,
                                   state.pi)
            hist.append(state)
    return hist


# ---------------------------------------------------------------------------
# Dyadic scaling operators and the cascade
# ---------------------------------------------------------------------------

def rescale_Sm(func, m: int):
    """S_m acting on a spacetime callable: (S_m f)(t, x) = f(2^m(t-2)+2, 2^m x).

    The time translation keeps t = 2 fixed, so the operators form a
    semigroup: S_a(S_b f) = S_{a+b} f.
    """
    if m < 0 or m != int(m):
        raise ValueError("m must be a nonnegative integer")
    lam = 2.0 ** m

    def scaled(t, x):
        x = np.asarray(x, dtype=float)
        return func(lam * (t - 2.0) + 2.0, lam * x)

    return scaled


def rescale_Sm_data(phi0, pi0, m: int, grid_from: CartesianGrid,
                    grid_to: CartesianGrid):
    """Pull Cauchy data at t=2 through S_m: (phi, pi) -> (S.phi(2^m .), 2^m pi(2^m .)).

    Sampling is bicubic on grid_from; points 2^m x outside grid_from must be
    outside the data's support (checked via the support radius).
    """
    from .grid import _space_interp, ScalarField
    if m < 0:
        raise ValueError("m must be a nonnegative integer")
    lam = 2.0 ** m
    sup = max(ScalarField(grid_from, phi0).support_radius(),
              ScalarField(grid_from, pi0).support_radius())
    X, Y = grid_to.mesh()
    out_phi = np.zeros((grid_to.n, grid_to.n))
    out_pi = np.zeros((grid_to.n, grid_to.n))
    pad = 2 * grid_from.h
    for i in range(grid_to.n):
        for j in range(grid_to.n):
            xs, ys = lam * X[i, j], lam * Y[i, j]
            if math.hypot(xs, ys) > sup + pad:
                continue
            if abs(xs) > grid_from.R or abs(ys) > grid_from.R:
                continue
            p = np.array([xs, ys])
            out_phi[i, j] = _space_interp(phi0, grid_from, p, "value")
            out_pi[i, j] = lam * _space_interp(pi0, grid_from, p, "value")
    return out_phi, out_pi


def dyadic_decompose(phi0_fn, pi0_fn, m_max: int):
    """Split closed-form data into annular pieces that telescope back.

    Piece 0 is cut by chi0(|x|); piece 0 < m < m_max by
    chi_m(x) = chi0(2^{-m}|x|) - chi0(2^{1-m}|x|), supported in the annulus
    |x| in [2^{m-2}, 2^m].  The last piece absorbs the entire remainder,
    1 - chi0(2^{1-m_max}|x|), so the pieces sum to the full data exactly;
    the caller must ensure the data are supported in |x| <= 2^{m_max} for
    the last stage to stay unit-ball sized after rescaling.  Returns a list
    of (phi_m, pi_m) callables over coordinate arrays (X, Y).
    """
    pieces = []
    for m in range(m_max + 1):
        if m == 0 and m_max == 0:
            def w(r, _m=m):
                return np.ones_like(r)
        elif m == 0:
            def w(r, _m=m):
                return chi0(r)
        elif m == m_max:
            def w(r, _m=m):
                return 1.0 - chi0(r / 2.0**(_m - 1))
        else:
            def w(r, _m=m):
                return chi0(r / 2.0**_m) - chi0(r / 2.0**(_m - 1))

        def make(fn, weight):
            def piece(X, Y):
                r = np.hypot(X, Y)
                return fn(X, Y) * weight(r)
            return piece

        pieces.append((make(phi0_fn, w), make(pi0_fn, w)))
    return pieces


class ScaledHistoryView:
    """Background sampler for a cascade stage.

    Stage m solves in its own rescaled frame; its background is the partial
    sum of earlier stages, each stored in *its* rescaled frame.  Evaluating
    stage k's field at stage-m coordinates (t, x) composes the scalings:
    phi_k-frame coordinates are (2^{m-k}(t-2)+2, 2^{m-k} x).  Points outside
    a stored grid or ahead of a stored window are outside the piece's
    support cone on the overlap region and contribute 0.
    """

    def __init__(self, histories: list[History], stage_m: int):
        self.histories = list(histories)
        self.stage_m = stage_m
        # Spatial interpolations of stored slices at a fixed query grid are
        # reused across every time step that shares the same bracket pair;
        # keyed (history index, slice time, field, dx, dy, grid id).
        self._interp_cache: dict = {}

    def sample_point(self, t: float, x, deriv: str = "value") -> float:
        total = 0.0
        for k, hist in enumerate(self.histories):
            lam = 2.0 ** (self.stage_m - k)
            tk = lam * (t - 2.0) + 2.0
            xk = lam * np.asarray(x, dtype=float)
            if np.max(np.abs(xk)) > hist.grid.R:
                continue
            try:
                v = sample_spacetime(hist, tk, xk, deriv)
            except WindowError:
                continue
            if deriv == "value":
                total += v
            elif deriv == "dt":
                total += lam * v
            else:  # dx1 / dx2
                total += lam * v
        return total

    def sample_fields(self, t: float, grid: CartesianGrid):
        """(Phi, d_t Phi, d_x1 Phi, d_x2 Phi) arrays on ``grid`` at time t."""
        from .grid import _hermite_weights, _hermite_weights_dt
        n = grid.n
        X, Y = grid.mesh()
        out = [np.zeros((n, n)) for _ in range(4)]
        cache = self._interp_cache
        for k, hist in enumerate(self.histories):
            lam = 2.0 ** (self.stage_m - k)
            tk = lam * (t - 2.0) + 2.0
            try:
                s0, s1 = hist.bracket(tk)
            except WindowError:
                continue
            g = hist.grid
            XQ, YQ = lam * X, lam * Y
            inside = (np.abs(XQ) <= g.R) & (np.abs(YQ) <= g.R)
            if not inside.any():
                continue
            xi = XQ[inside]
            yi = YQ[inside]
            # drop cache entries for brackets the evolution has moved past
            stale = [key for key in cache
                     if key[0] == k and key[1] < s0.t - 1e-12]
            for key in stale:
                del cache[key]

            def interp(state, field, dx, dy):
                key = (k, state.t, field, dx, dy, id(grid))
                arr = cache.get(key)
                if arr is None:
                    arr = bicubic_many(getattr(state, field), g, xi, yi,
                                       dx, dy)
                    cache[key] = arr
                return arr

            dtb = s1.t - s0.t
            s = (tk - s0.t) / dtb
            wv = _hermite_weights(s, dtb)
            wd = _hermite_weights_dt(s, dtb)
            for w, dx, dy, slot in ((wv, False, False, 0),
                                    (wd, False, False, 1),
                                    (wv, True, False, 2),
                                    (wv, False, True, 3)):
                acc = (w[0] * interp(s0, "phi", dx, dy)
                       + w[1] * interp(s0, "pi", dx, dy)
                       + w[2] * interp(s1, "phi", dx, dy)
                       + w[3] * interp(s1, "pi", dx, dy))
                fac = 1.0 if slot == 0 else lam
                out[slot][inside] += fac * acc
        return out


@dataclass
class CascadeResult:
    stage_histories: list[History]       # each in its own rescaled frame
    stage_configs: list[SolverConfig]
    m_max: int

    def partial_sum(self, t: float, x, n_stages: int | None = None,
                    deriv: str = "value") -> float:
        """Physical-frame partial sum Sum_{m<n} phi_m(t, x)."""
        n_stages = (self.m_max + 1) if n_stages is None else n_stages
        view = ScaledHistoryView(self.stage_histories[:n_stages], 0)
        return view.sample_point(t, x, deriv)

    def stage_field_physical(self, m: int, t: float, x) -> float:
        """phi_m evaluated in the physical frame."""
        view = ScaledHistoryView([self.stage_histories[m]], -m)
        # stage_m = -m maps physical (t,x) into stage-m frame via 2^{-m}
        lam = 2.0 ** (-m)
        hist = self.stage_histories[m]
        tk = lam * (t - 2.0) + 2.0
        xk = lam * np.asarray(x, dtype=float)
        if np.max(np.abs(xk)) > hist.grid.R:
            return 0.0
        try:
            return sample_spacetime(hist, tk, xk, "value")
        except WindowError:
            return 0.0


def cascade(phi0_fn, pi0_fn, m_max: int, cfg: SolverConfig,
            observers_factory=None) -> CascadeResult:
    """Iteratively build the solution from annular dyadic pieces.

    The data are split into pieces (phi_m, pi_m); stage m solves the
    perturbation equation against the background Phi_m = Sum_{k<m} phi_k —
    but in its own rescaled frame, so every stage sees unit-ball-sized data
    on cfg's grid.  Stage m's rescaled time horizon is
    t_end_m = 2^{-m}(cfg.t_end - 2) + 2.
    """
    pieces = dyadic_decompose(phi0_fn, pi0_fn, m_max)
    histories: list[History] = []
    configs: list[SolverConfig] = []
    for m in range(m_max + 1):
        lam = 2.0 ** m
        phi_fn, pi_fn = pieces[m]
        t_end_m = (cfg.t_end - 2.0) / lam + 2.0
        # Stage m lives in a frame where lengths shrink by 2^m; using a frame
        # radius of R / 2^m keeps the physical grid spacing uniform across
        # stages.  The frame light cone needs radius 1 + (t_end_m - 2), so the
        # caller must ensure R >= 2^m + (t_end - 2).
        R_m = cfg.R / lam
        # Frame data support: annular pieces reach frame radius 2; the final
        # remainder piece stays within frame radius 1 when the data support is
        # at most 2^m_max (the caller's contract for dyadic_decompose).
        support_m = 2.0 if (0 < m_max and m < m_max) else 1.0
        if m_max > 0 and R_m < support_m + (t_end_m - 2.0) - 1e-12:
            raise ValueError(
                f"stage {m} frame radius {R_m} does not cover its light cone; "
                f"need R >= {lam * support_m + cfg.t_end - 2.0}")
        # Frame dt_out shrinks with the frame time axis so the *physical*
        # output cadence (which bounds the Hermite reconstruction error of
        # the partial sum and of stage backgrounds) is uniform across stages.
        dt_out_m = None if cfg.dt_out is None else cfg.dt_out / lam
        cfg_m = SolverConfig(R=R_m, n=cfg.n, cfl=cfg.cfl, t_end=t_end_m,
                             dt_out=dt_out_m, t_start=2.0,
                             blowup_factor=cfg.blowup_factor,
                             retain=cfg.retain)
        X, Y = cfg_m.grid.mesh()
        # data for stage m in its rescaled frame: x -> 2^m x, pi gains 2^m
        phi0 = phi_fn(lam * X, lam * Y)
        pi0 = lam * pi_fn(lam * X, lam * Y)
        if m == 0:
            kind = NonlinearityKind.wave_map()
        else:
            kind = NonlinearityKind.perturbation(
                ScaledHistoryView(histories, m))
        obs = observers_factory(m) if observers_factory else ()
        try:
            hist = evolve((phi0, pi0), cfg_m, kind, observers=obs, stage=m)
        except BlowupError as e:
            raise BlowupError(e.t, e.max_abs, stage=m) from e
        histories.append(hist)
        configs.append(cfg_m)
    return CascadeResult(histories, configs, m_max)


# ---------------------------------------------------------------------------
# Scaling-identity and comparability checks (analytic-side)
# ---------------------------------------------------------------------------

def scaling_identity_residuals(f, m: int, points,
                               relative: bool = False) -> dict[str, float]:
    """Max residuals of the commutation rules between the dyadic scaling S_m
    and the derivative/symmetry fields, on an analytic test function ``f``.

    All derivatives are taken through the geometry module, so the two sides
    of each rule follow genuinely different evaluation routes.  Rules:

    * d_a (S_m f) = 2^m S_m(d_a f)                          (a = t, x^1, x^2)
    * Omega_12 (S_m f) = S_m(Omega_12 f)
    * L^i (S_m f) = S_m(L^i f) + (2^{m+1} - 2) S_m(d_{x^i} f)
    * (K + t)(S_m f) = 2^{-m} S_m((K + t) f)
        + 4(1 - 2^{-m}) S_m( sum_i (x^i/t) L^i f + (tau^2/t) d_t f )
        + 2^{-m} (2^{m+1} - 2)^2 S_m(d_t f)
        + 2(1 - 2^{-m}) S_m f

    The boost rule's correction multiplies the *spatial* derivative; the
    residual below is machine-zero with that form and O(1) otherwise.
    With ``relative=True`` each residual is normalized by the size of the
    sides (the scaled twist terms grow like 2^{2m} t^2, so roundoff scales
    with them).
    """
    from .geometry import (Boost, Dt, Dx, Rotation, SpacetimePoint,
                           _apply_twist, apply_field)
    from .testfuncs import scaled

    lam = 2.0 ** m
    fs = scaled(f, m)

    def norm(lhs, rhs):
        r = abs(lhs - rhs)
        return r / max(1.0, abs(lhs), abs(rhs)) if relative else r

    res = {"SmDcomm": 0.0, "SmOcomm": 0.0, "SmLcomm": 0.0, "SmKcomm": 0.0}
    for (t, x) in points:
        x = np.asarray(x, dtype=float)
        p = SpacetimePoint(t, x)
        ps = SpacetimePoint(lam * (t - 2.0) + 2.0, lam * x)
        if ps.t <= ps.r:
            continue  # tau^2/t term needs the scaled point inside the cone
        tau_s2 = ps.t * ps.t - ps.r * ps.r

        for vf in (Dt(), Dx(1), Dx(2)):
            lhs = apply_field(vf, fs, p)
            rhs = lam * apply_field(vf, f, ps)
            res["SmDcomm"] = max(res["SmDcomm"], norm(lhs, rhs))

        lhs = apply_field(Rotation(1, 2), fs, p)
        rhs = apply_field(Rotation(1, 2), f, ps)
        res["SmOcomm"] = max(res["SmOcomm"], norm(lhs, rhs))

        for i in (1, 2):
            lhs = apply_field(Boost(i), fs, p)
            rhs = (apply_field(Boost(i), f, ps)
                   + (2.0 * lam - 2.0) * apply_field(Dx(i), f, ps))
            res["SmLcomm"] = max(res["SmLcomm"], norm(lhs, rhs))

        lhs = _apply_twist(fs, p)
        mid = sum((ps.x[i - 1] / ps.t) * apply_field(Boost(i), f, ps)
                  for i in (1, 2))
        mid += (tau_s2 / ps.t) * apply_field(Dt(), f, ps)
        rhs = (_apply_twist(f, ps) / lam
               + 4.0 * (1.0 - 1.0 / lam) * mid
               + (2.0 * lam - 2.0) ** 2 / lam * apply_field(Dt(), f, ps)
               + 2.0 * (1.0 - 1.0 / lam) * f.value(ps.t, ps.x))
        res["SmKcomm"] = max(res["SmKcomm"], norm(lhs, rhs))
    return res


def tau_comparability_check(m: int, points) -> dict:
    """Strict comparabilities between tau and its pullback under S_m.

    For points (t, x) with S_m t > max(1 + |S_m x|, 2):
      upper: S_m tau < 2^m tau         (strict for m >= 1, t >= 2)
      lower: S_m tau >= (2^{m/2} / sqrt(3)) tau
    Returns min margins (positive = holds strictly).

    The lower bound sharpens with tau: expanding S_m tau through the scaling
    map and eliminating t via the support constraint t - |x| > 2 - 2^{-m}
    gives (S_m tau)^2 > 2^{m-1} [tau^2/(1 - 2^{-m-1}) - 4(1 - 2^{-m})],
    which implies the 2^{m/2}/sqrt(3) form once tau >= sqrt(12) (all m), and
    an m-independent floor S_m tau > (sqrt(3)/2) tau everywhere on the set.
    Callers sampling slices at tau >= 4 are always in the guaranteed regime.
    """
    lam = 2.0 ** m
    up_margin = math.inf
    lo_margin = math.inf
    used = 0
    for (t, x) in points:
        x = np.asarray(x, dtype=float)
        r = float(np.hypot(*x))
        ts = lam * (t - 2.0) + 2.0
        rs = lam * r
        if not (ts > max(1.0 + rs, 2.0)):
            continue
        if t * t - r * r <= 0 or ts * ts - rs * rs <= 0:
            continue
        used += 1
        tau = math.sqrt(t * t - r * r)
        tau_s = math.sqrt(ts * ts - rs * rs)
        up_margin = min(up_margin, lam * tau - tau_s)
        lo_margin = min(lo_margin, tau_s - (2.0 ** (m / 2.0) / math.sqrt(3.0)) * tau)
    return {"m": m, "points_used": used,
            "upper_margin": up_margin, "lower_margin": lo_margin,
            "upper_ok": used > 0 and up_margin > 0,
            "lower_ok": used > 0 and lo_margin >= 0}
