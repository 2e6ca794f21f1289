"""Uniform Cartesian grids, stencils, and space/time interpolation.

The solver publishes (phi, pi = d_t phi) snapshots into a History at a fixed
output cadence; downstream consumers interpolate in space (bicubic Lagrange)
and in time (cubic Hermite built from the stored (phi, pi) pairs, so the
time derivative of the interpolant is consistent with pi).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CartesianGrid",
    "ScalarField",
    "EvolutionState",
    "History",
    "WindowError",
    "DomainError",
    "gradient",
    "laplacian",
    "sample_spacetime",
    "boost_sample",
    "write_field",
    "read_field",
]


class WindowError(ValueError):
    """Requested time lies outside the retained history window."""


class DomainError(ValueError):
    """Requested position lies outside the grid domain."""


@dataclass(frozen=True)
class CartesianGrid:
    """Square grid on [-R, R]^2 with n points per axis."""

    R: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs n >= 16")
        if self.R <= 0:
            raise ValueError("grid needs R > 0")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.n - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.n)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        # frozen dataclass: cache via object.__setattr__ (meshes are reused
        # by every observer on every recorded state)
        cached = getattr(self, "_mesh_cache", None)
        if cached is None:
            ax = self.axis()
            cached = np.meshgrid(ax, ax, indexing="ij")
            object.__setattr__(self, "_mesh_cache", cached)
        return cached

    def radius(self) -> np.ndarray:
        X, Y = self.mesh()
        return np.hypot(X, Y)


@dataclass
class ScalarField:
    grid: CartesianGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError("values shape does not match grid")

    def gradient(self) -> tuple["ScalarField", "ScalarField"]:
        gx, gy = gradient(self.values, self.grid.h)
        return ScalarField(self.grid, gx), ScalarField(self.grid, gy)

    def laplacian(self) -> "ScalarField":
        return ScalarField(self.grid, laplacian(self.values, self.grid.h))

    def support_radius(self, threshold: float = 1e-14) -> float:
        mask = np.abs(self.values) > threshold
        if not mask.any():
            return 0.0
        return float(self.grid.radius()[mask].max())


@dataclass
class EvolutionState:
    """(t, phi, pi) on a shared grid; arrays are treated as immutable once
    published to a History."""

    t: float
    grid: CartesianGrid
    phi: np.ndarray
    pi: np.ndarray
    # lazily cached spatial derivative fields, keyed by name
    _cache: dict = field(default_factory=dict, repr=False)

    def max_abs_phi(self) -> float:
        return float(np.max(np.abs(self.phi)))

    def support_radius(self, threshold: float = 1e-14) -> float:
        mask = (np.abs(self.phi) > threshold) | (np.abs(self.pi) > threshold)
        if not mask.any():
            return 0.0
        return float(self.grid.radius()[mask].max())

    def derived(self, name: str) -> np.ndarray:
        """Cached stencil fields of this snapshot: ``phi_x``, ``phi_y``,
        ``pi_x``, ``pi_y``, ``lap_phi``."""
        if name not in self._cache:
            h = self.grid.h
            if name in ("phi_x", "phi_y"):
                gx, gy = gradient(self.phi, h)
                self._cache["phi_x"], self._cache["phi_y"] = gx, gy
            elif name in ("pi_x", "pi_y"):
                gx, gy = gradient(self.pi, h)
                self._cache["pi_x"], self._cache["pi_y"] = gx, gy
            elif name == "lap_phi":
                self._cache["lap_phi"] = laplacian(self.phi, h)
            else:
                raise KeyError(name)
        return self._cache[name]


def gradient(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """2nd-order centered differences, 2nd-order one-sided at the edges."""
    gx = np.gradient(values, h, axis=0, edge_order=2)
    gy = np.gradient(values, h, axis=1, edge_order=2)
    return gx, gy


def laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """5-point stencil in the interior, one-sided 4-point second derivative
    at the edges (2nd order throughout)."""
    v = values
    out = np.empty_like(v)
    inv_h2 = 1.0 / (h * h)

    dxx = np.empty_like(v)
    dxx[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) * inv_h2
    dxx[0, :] = (2.0 * v[0, :] - 5.0 * v[1, :] + 4.0 * v[2, :]
                 - v[3, :]) * inv_h2
    dxx[-1, :] = (2.0 * v[-1, :] - 5.0 * v[-2, :] + 4.0 * v[-3, :]
                  - v[-4, :]) * inv_h2

    dyy = np.empty_like(v)
    dyy[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) * inv_h2
    dyy[:, 0] = (2.0 * v[:, 0] - 5.0 * v[:, 1] + 4.0 * v[:, 2]
                 - v[:, 3]) * inv_h2
    dyy[:, -1] = (2.0 * v[:, -1] - 5.0 * v[:, -2] + 4.0 * v[:, -3]
                  - v[:, -4]) * inv_h2

    np.add(dxx, dyy, out=out)
    return out


class History:
    """Ordered buffer of EvolutionStates at a uniform output cadence.

    ``retain`` bounds the number of stored states (ring buffer); ``None``
    keeps everything, which is what the post-hoc diagnostics on small runs
    use.  Appends are single-writer; reads only see published states.
    """

    def __init__(self, grid: CartesianGrid, dt_out: float,
                 retain: int | None = None):
        if dt_out <= 0:
            raise ValueError("dt_out must be positive")
        self.grid = grid
        self.dt_out = float(dt_out)
        self.states: deque[EvolutionState] = deque(maxlen=retain)
        self._observers = []

    def append(self, state: EvolutionState) -> None:
        if self.states:
            expected = self.states[-1].t + self.dt_out
            if abs(state.t - expected) > 1e-12 * max(1.0, abs(expected)):
                raise ValueError(
                    f"append at t={state.t}, expected t={expected}")
        self.states.append(state)
        for obs in self._observers:
            obs.on_state(self, state)

    def add_observer(self, obs) -> None:
        self._observers.append(obs)

    @property
    def t_first(self) -> float:
        return self.states[0].t

    @property
    def t_last(self) -> float:
        return self.states[-1].t

    def window(self) -> tuple[float, float]:
        if not self.states:
            raise WindowError("history is empty")
        return self.t_first, self.t_last

    def bracket(self, t: float) -> tuple[EvolutionState, EvolutionState]:
        t0, t1 = self.window()
        if not (t0 - 1e-12 <= t <= t1 + 1e-12):
            raise WindowError(
                f"t={t} outside retained window [{t0}, {t1}]")
        k = int(np.floor((t - t0) / self.dt_out + 1e-12))
        k = min(max(k, 0), len(self.states) - 2) if len(self.states) > 1 else 0
        if len(self.states) == 1:
            raise WindowError("need at least two states to interpolate")
        return self.states[k], self.states[k + 1]


def _hermite_weights(s: float, dt: float):
    """Cubic Hermite basis at normalized position s in [0, 1]."""
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00, h10 * dt, h01, h11 * dt


def _hermite_weights_dt(s: float, dt: float):
    """Time derivative of the Hermite basis."""
    d00 = 6 * s * (s - 1) / dt
    d10 = (1 - s) * (1 - 3 * s)
    d01 = -6 * s * (s - 1) / dt
    d11 = s * (3 * s - 2)
    return d00, d10, d01, d11


def _cubic_nodes(coord: float, R: float, h: float, n: int):
    """4-node Lagrange window along one axis; clamped near the domain edge."""
    if not (-R - 1e-12 <= coord <= R + 1e-12):
        raise DomainError(f"coordinate {coord} outside [-{R}, {R}]")
    j = int(np.floor((coord + R) / h))
    j0 = min(max(j - 1, 0), n - 4)
    xs = -R + h * np.arange(j0, j0 + 4)
    return j0, xs


def _lagrange_weights(x: float, xs: np.ndarray, deriv: bool):
    w = np.empty(4)
    for a in range(4):
        others = [b for b in range(4) if b != a]
        denom = np.prod([xs[a] - xs[b] for b in others])
        if not deriv:
            w[a] = np.prod([x - xs[b] for b in others]) / denom
        else:
            s = 0.0
            for skip in others:
                s += np.prod([x - xs[b] for b in others if b != skip])
            w[a] = s / denom
    return w


def _space_interp(values: np.ndarray, grid: CartesianGrid, x: np.ndarray,
                  deriv: str) -> float:
    """Bicubic Lagrange value or first derivative at a point."""
    i0, xs = _cubic_nodes(x[0], grid.R, grid.h, grid.n)
    j0, ys = _cubic_nodes(x[1], grid.R, grid.h, grid.n)
    wx = _lagrange_weights(x[0], xs, deriv == "dx1")
    wy = _lagrange_weights(x[1], ys, deriv == "dx2")
    block = values[i0:i0 + 4, j0:j0 + 4]
    return float(wx @ block @ wy)


_SPACE_DERIVS = {"value": "value", "dx1": "dx1", "dx2": "dx2"}


def sample_spacetime(hist: History, t: float, x, deriv: str = "value") -> float:
    """Sample phi (or a first derivative) at an off-grid spacetime point.

    Bicubic in space, cubic Hermite in time; ``deriv`` is one of ``value``,
    ``dt``, ``dx1``, ``dx2``.
    """
    x = np.asarray(x, dtype=float)
    s0, s1 = hist.bracket(t)
    dt = s1.t - s0.t
    s = (t - s0.t) / dt
    if deriv == "dt":
        w = _hermite_weights_dt(s, dt)
        space = "value"
    elif deriv in _SPACE_DERIVS:
        w = _hermite_weights(s, dt)
        space = deriv
    else:
        raise ValueError(f"unknown deriv {deriv!r}")
    f0 = _space_interp(s0.phi, hist.grid, x, space)
    g0 = _space_interp(s0.pi, hist.grid, x, space)
    f1 = _space_interp(s1.phi, hist.grid, x, space)
    g1 = _space_interp(s1.pi, hist.grid, x, space)
    return w[0] * f0 + w[1] * g0 + w[2] * f1 + w[3] * g1


def boost_sample(hist: History, i: int, t: float, x) -> float:
    """L^i phi = t (d_{x^i} phi) + x^i (d_t phi) at a spacetime point."""
    x = np.asarray(x, dtype=float)
    if i not in (1, 2):
        raise ValueError("boost index must be 1 or 2")
    dxi = sample_spacetime(hist, t, x, deriv=f"dx{i}")
    dt = sample_spacetime(hist, t, x, deriv="dt")
    return t * dxi + x[i - 1] * dt


def bicubic_many(values: np.ndarray, g: CartesianGrid,
                 xq: np.ndarray, yq: np.ndarray,
                 dx: bool = False, dy: bool = False) -> np.ndarray:
    """Bicubic Lagrange interpolation (or first derivative per axis) at many
    points at once; callers must ensure the points lie inside the domain."""
    h, R, n = g.h, g.R, g.n
    i0 = np.clip(np.floor((xq + R) / h).astype(np.int64) - 1, 0, n - 4)
    j0 = np.clip(np.floor((yq + R) / h).astype(np.int64) - 1, 0, n - 4)
    wx = _lagrange_many(xq, -R + h * i0, h, dx)
    wy = _lagrange_many(yq, -R + h * j0, h, dy)
    out = np.zeros_like(xq, dtype=float)
    for a in range(4):
        row = np.zeros_like(out)
        for b in range(4):
            row += wy[:, b] * values[i0 + a, j0 + b]
        out += wx[:, a] * row
    return out


def _lagrange_many(x: np.ndarray, x0: np.ndarray, h: float,
                   deriv: bool) -> np.ndarray:
    """4-node Lagrange weights (or d/dx weights) for uniformly spaced nodes
    x0, x0+h, x0+2h, x0+3h, vectorized over points."""
    s = (x - x0) / h
    w = np.empty((x.size, 4))
    nodes = np.arange(4.0)
    for a in range(4):
        others = [b for b in range(4) if b != a]
        denom = np.prod([nodes[a] - nodes[b] for b in others])
        if not deriv:
            p = np.ones_like(s)
            for b in others:
                p *= (s - nodes[b])
            w[:, a] = p / denom
        else:
            acc = np.zeros_like(s)
            for skip in others:
                p = np.ones_like(s)
                for b in others:
                    if b != skip:
                        p *= (s - nodes[b])
                acc += p
            w[:, a] = acc / (denom * h)
    return w


# ---------------------------------------------------------------------------
# Raw field dump: one JSON header line, then row-major little-endian float64
# ---------------------------------------------------------------------------

def write_field(path, f: ScalarField, t: float, kind: str) -> None:
    header = {"n": f.grid.n, "R": f.grid.R, "t": t, "kind": kind}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(f.values.astype("<f8").tobytes(order="C"))


def read_field(path) -> tuple[ScalarField, dict]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        raw = fh.read()
    n = int(header["n"])
    values = np.frombuffer(raw, dtype="<f8").reshape(n, n).copy()
    grid = CartesianGrid(R=float(header["R"]), n=n)
    return ScalarField(grid, values), header
