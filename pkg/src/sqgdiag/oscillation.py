"""Oscillation-decay machinery: tails, velocity splits, flow recentering.

This module implements the quantitative steps of the eventual-regularization
argument as measurable diagnostics on simulation output:

* tail integrals of |theta| / |x|^2 outside the unit ball, with the decay
  bounds they must satisfy along a run;
* parabolic cylinders Q_r = B_r x [0, r) x (t0 - r^alpha, t0] and the
  oscillation of a field history over them (z = 0 slice; the solver evolves
  the boundary trace);
* the three-piece truncated-kernel decomposition of the velocity around a
  point (near field over B_2, annulus up to B_{2/rho}, recentred far field)
  plus the constant far-field drift w_bar;
* the flow-following recentering ODE V' = M w_slow(V, t) integrated
  backward from V(t_end) = 0;
* the zoom-recenter-renormalize step producing the next iterate
  theta_{k+1} = (theta(. + V) - m) / rho^delta on the rescaled cylinder,
  with all bookkeeping bounds re-checked rather than assumed;
* a Hoelder seminorm estimator and the driver that runs the whole
  iteration, measuring the per-step oscillation improvement eta and fitting
  an empirical decay exponent.

All plane integrals are truncated at the fundamental-domain boundary
(centered at the point of interest); the truncation radius is recorded.
Near-singular kernel sums at grid nodes carry the lattice renormalization
correction kappa * h * grad(theta), which removes the O(h) error of the
punctured midpoint rule.
"""

import json
from dataclasses import dataclass

import numpy as np

from .constants import choose_delta
from .spectral import (
    Grid,
    RIESZ_KERNEL_CONSTANT,
    ScalarField,
    evaluate_on_lattice,
    gradient,
    random_band_limited,
)

# Finite part of the punctured lattice sum of u_i u_j / |u|^3 minus its
# continuum integral (Epstein-zeta regularization, Gaussian cutoff).
LATTICE_KAPPA = -1.9501313

EDGE_MARGIN = 0.9  # fraction of the half-side inside which bounds are checked

# Frozen output of calibrate_split_bound_constant: the single constant C
# with sup_B1 |w2| <= -C log(rho) and sup_B1 |w3| <= C rho across the
# declared admissible family (growth envelope 2 |x|^(2 delta) outside B_1).
SPLIT_BOUND_CONSTANT = 0.15


def tail_truncation_radius(grid):
    """Radius at which plane tail integrals are truncated (half side)."""
    return 0.5 * grid.side_length


def tail_integral(theta, center):
    """Quadrature of |theta(x)| / |x - center|^2 outside the unit ball.

    The integral runs over the fundamental domain centered at ``center``
    (minimal-image metric), i.e. it is truncated at tail_truncation_radius.
    """
    grid = theta.grid
    if tail_truncation_radius(grid) < 1.25:
        raise ValueError(
            "unit ball does not fit well inside the fundamental domain "
            f"(truncation radius {tail_truncation_radius(grid):.3f} < 1.25)"
        )
    d1, d2 = grid.displacement(center)
    r2 = d1 * d1 + d2 * d2
    outside = r2 >= 1.0
    integrand = np.where(outside, np.abs(theta.values) / np.where(outside, r2, 1.0), 0.0)
    return float(np.sum(integrand) * grid.spacing**2)


@dataclass
class TailEstimate:
    time: float
    tail_value: float
    bound_basic: float
    bound_improved: float  # inf when not applicable (t <= 1)

    @property
    def passed(self):
        ok = self.tail_value <= self.bound_basic
        if np.isfinite(self.bound_improved):
            ok = ok and self.tail_value <= self.bound_improved
        return bool(ok)


def calibrate_tail_constant(histories, l2_initials, center, calibration_time=0.1, safety=4.0):
    """Frozen tail constant: safety * worst ratio at the calibration time.

    histories: iterable of snapshot lists (each a run); the snapshot closest
    to calibration_time is used per run.
    """
    worst = 0.0
    for hist, l2i in zip(histories, l2_initials):
        times = np.array([f.time_stamp for f in hist])
        j = int(np.argmin(np.abs(times - calibration_time)))
        worst = max(worst, tail_integral(hist[j], center) / l2i)
    return safety * worst


def tail_series(history, center, l2_initial, constant, alpha):
    """TailEstimate per snapshot with both lemma bounds attached.

    bound_basic = C ||theta_0||_L2 for all t; for t > 1 additionally
    bound_improved = C (1 + log t) t^(-alpha) ||theta_0||_L2.
    """
    out = []
    for f in history:
        t = f.time_stamp
        basic = constant * l2_initial
        improved = (
            constant * (1.0 + np.log(t)) * t ** (-alpha) * l2_initial
            if t > 1.0
            else np.inf
        )
        out.append(
            TailEstimate(
                time=t,
                tail_value=tail_integral(f, center),
                bound_basic=basic,
                bound_improved=improved,
            )
        )
    return out


@dataclass(frozen=True)
class ParabolicCylinder:
    """B_r(center_x) x [0, r) x (center_t - r^alpha, center_t]."""

    center_x: tuple
    center_t: float
    radius: float
    alpha: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    @property
    def t_start(self):
        return self.center_t - self.radius**self.alpha

    def shrunk(self, factor):
        """Concentric cylinder with radius scaled by ``factor`` <= 1."""
        return ParabolicCylinder(self.center_x, self.center_t, self.radius * factor, self.alpha)

    def contains_time(self, t):
        return (self.t_start < t + 1e-12) and (t <= self.center_t + 1e-12)

    def space_mask(self, grid, shift=(0.0, 0.0)):
        cx = (self.center_x[0] + shift[0], self.center_x[1] + shift[1])
        d1, d2 = grid.displacement(cx)
        return d1 * d1 + d2 * d2 < self.radius**2


def oscillation(history, cyl):
    """max - min of theta over grid nodes and snapshots inside the cylinder.

    The extension direction enters only through the z = 0 slice: the solver
    evolves the boundary trace, and the extension attains its extremes
    there.
    """
    if not history:
        raise ValueError("empty history")
    grid = history[0].grid
    if cyl.radius / grid.spacing < 8.0:
        raise ValueError(
            f"grid does not resolve the cylinder radius: {cyl.radius / grid.spacing:.1f} "
            "points across (need >= 8)"
        )
    times = np.array([f.time_stamp for f in history])
    if times[0] > cyl.t_start + 1e-9 or times[-1] < cyl.center_t - 1e-9:
        raise ValueError("history does not cover the cylinder's time interval")
    inside = [i for i, t in enumerate(times) if cyl.contains_time(t) and t > cyl.t_start + 1e-12]
    if not inside:
        raise ValueError("no snapshots inside the cylinder's time interval")
    vmax, vmin = -np.inf, np.inf
    mask = cyl.space_mask(grid)
    for i in inside:
        vals = history[i].values[mask]
        if vals.size:
            vmax = max(vmax, float(vals.max()))
            vmin = min(vmin, float(vals.min()))
    if not np.isfinite(vmax):
        return 0.0
    return vmax - vmin


# --- velocity split ---


def _kernel_sum(theta_vals, d1, d2, region_mask, h):
    """c * sum over region of theta(y) (y - x)^perp / |y - x|^3 * h^2.

    d1, d2 are displacements y - x; the perp convention is
    u^perp = (-u_2, u_1).
    """
    r2 = d1 * d1 + d2 * d2
    ok = region_mask & (r2 > 1e-12 * h * h)
    inv_r3 = np.where(ok, 1.0 / np.where(ok, r2, 1.0) ** 1.5, 0.0)
    w1 = RIESZ_KERNEL_CONSTANT * np.sum(-d2 * theta_vals * inv_r3) * h * h
    w2 = RIESZ_KERNEL_CONSTANT * np.sum(d1 * theta_vals * inv_r3) * h * h
    return np.array([w1, w2])


@dataclass
class VelocitySplit:
    """Truncated-kernel decomposition of the velocity around a center.

    rho = None selects the first-step split (near field over B_2, slow
    component over everything outside B_2, no far recentred piece).  For
    rho < 1, the pieces are: w1 over B_2(center), w2 over the annulus
    B_{2/rho} minus B_2, w3 over the complement of B_{2/rho} with the kernel
    recentred by its value at the center, and the constant w_bar.  Regions
    are truncated at the fundamental-domain boundary; ``truncated`` flags
    whether B_{2/rho} overflowed the domain.
    """

    theta: ScalarField
    center: tuple
    rho: float = None

    def __post_init__(self):
        if self.rho is not None and not (0.0 < self.rho < 1.0):
            raise ValueError("rho must lie in (0, 1)")
        grid = self.theta.grid
        self._d1c, self._d2c = grid.displacement(self.center)
        r2 = self._d1c**2 + self._d2c**2
        self._inner = r2 < 4.0
        half = 0.5 * grid.side_length
        if self.rho is None:
            self._annulus = ~self._inner
            self._far = np.zeros_like(self._inner)
            self.truncated = half < 4.0
            self.w_bar = np.zeros(2)
        else:
            r_far = 2.0 / self.rho
            self._annulus = (~self._inner) & (r2 < r_far**2)
            self._far = r2 >= r_far**2
            self.truncated = r_far > half
            self.w_bar = _kernel_sum(
                self.theta.values, self._d1c, self._d2c, self._far, grid.spacing
            )
        self._grad = None

    def _gradient_at_node(self, i, j):
        if self._grad is None:
            self._grad = gradient(self.theta)
        return self._grad[0][i, j], self._grad[1][i, j]

    def _node_index(self, point):
        grid = self.theta.grid
        h = grid.spacing
        L = grid.side_length
        i = int(round(point[0] / h)) % grid.n
        j = int(round(point[1] / h)) % grid.n
        d1 = (i * h - point[0] + 0.5 * L) % L - 0.5 * L
        d2 = (j * h - point[1] + 0.5 * L) % L - 0.5 * L
        if abs(d1) > 1e-6 * h or abs(d2) > 1e-6 * h:
            raise ValueError("near-field evaluation requires grid-node targets")
        return i, j

    def w1(self, point):
        """Near-field piece at a grid node, with the lattice correction."""
        grid = self.theta.grid
        i, j = self._node_index(point)
        d1, d2 = grid.displacement(point)
        out = _kernel_sum(self.theta.values, d1, d2, self._inner, grid.spacing)
        g1, g2 = self._gradient_at_node(i, j)
        corr = RIESZ_KERNEL_CONSTANT * LATTICE_KAPPA * grid.spacing
        out[0] -= corr * (-g2)
        out[1] -= corr * g1
        return out

    def w2(self, point):
        grid = self.theta.grid
        d1, d2 = grid.displacement(point)
        return _kernel_sum(self.theta.values, d1, d2, self._annulus, grid.spacing)

    def w3(self, point):
        """Far piece with the kernel recentred at the split center."""
        if self.rho is None:
            return np.zeros(2)
        grid = self.theta.grid
        h = grid.spacing
        d1, d2 = grid.displacement(point)
        r2 = d1 * d1 + d2 * d2
        ok = self._far & (r2 > 1e-12)
        inv_r3 = np.where(ok, 1.0 / np.where(ok, r2, 1.0) ** 1.5, 0.0)
        r2c = self._d1c**2 + self._d2c**2
        okc = self._far & (r2c > 1e-12)
        inv_r3c = np.where(okc, 1.0 / np.where(okc, r2c, 1.0) ** 1.5, 0.0)
        th = self.theta.values
        k1 = RIESZ_KERNEL_CONSTANT * np.sum(th * (-d2 * inv_r3 + self._d2c * inv_r3c)) * h * h
        k2 = RIESZ_KERNEL_CONSTANT * np.sum(th * (d1 * inv_r3 - self._d1c * inv_r3c)) * h * h
        return np.array([k1, k2])

    def slow(self, point):
        """w2 + w3: the continuous-in-x components driving the flow ODE."""
        return self.w2(point) + self.w3(point)

    def sup_slow_components(self, points):
        """(sup |w2|, sup |w3|) over the given evaluation points."""
        s2 = max(float(np.hypot(*self.w2(p))) for p in points)
        s3 = max(float(np.hypot(*self.w3(p))) for p in points)
        return s2, s3


def split_velocity(theta, rho, center):
    """Build the velocity decomposition (see VelocitySplit)."""
    return VelocitySplit(theta, center, rho)


def admissible_field(grid, center, delta, seed, band=12):
    """A member of the split-bound calibration family.

    Random band-limited field clipped by the step-k growth envelope:
    |theta| <= 1 inside B_1(center) and |theta| <= 2 |x|^(2 delta) outside.
    """
    d1, d2 = grid.displacement(center)
    r = np.hypot(d1, d2)
    envelope = np.minimum(1.0, 2.0 * np.maximum(r, 1e-9) ** (2.0 * delta))
    envelope[r <= 1.0] = 1.0
    base = random_band_limited(grid, band, seed, amplitude=1.0)
    return ScalarField(grid, base.values * envelope)


def calibrate_split_bound_constant(
    rhos=(0.25, 0.125), count=8, delta=0.1, n=1024, side=40.0, seed=77
):
    """Largest of sup|w2| / (-log rho) and sup|w3| / rho over the family.

    SPLIT_BOUND_CONSTANT freezes this number (with headroom); the suite
    re-checks the bounds against the frozen value on a reduced sweep.
    """
    grid = Grid(n, side)
    c = (0.5 * side, 0.5 * side)
    pts = _bound_sample_points(grid, c, 3, 8)
    worst = 0.0
    for rho in rhos:
        for i in range(count):
            theta = admissible_field(grid, c, delta, [seed, 3, i])
            sp = VelocitySplit(theta, c, rho)
            s2, s3 = sp.sup_slow_components(pts)
            worst = max(worst, s2 / (-np.log(rho)), s3 / rho)
    return worst


# --- flow-following recentering ---


@dataclass
class RecenterPath:
    times: np.ndarray  # ascending
    points: np.ndarray  # shape (len(times), 2)

    @property
    def max_abs(self):
        return float(np.max(np.hypot(self.points[:, 0], self.points[:, 1])))

    def at(self, t):
        x = np.interp(t, self.times, self.points[:, 0])
        y = np.interp(t, self.times, self.points[:, 1])
        return np.array([x, y])


def recenter_flow(w_slow, M, t_start, t_end=1.0, max_step=None):
    """Integrate V' = M w_slow(V, t) backward from V(t_end) = 0.

    Classical fourth-order one-step method; ``max_step`` defaults to
    (t_end - t_start) / 64.  Returns the sampled path on the uniform
    integration grid, ascending in time.
    """
    span = t_end - t_start
    if span <= 0:
        raise ValueError("t_start must precede t_end")
    if max_step is None:
        max_step = span / 64.0
    n = max(1, int(np.ceil(span / max_step - 1e-12)))
    dt = -span / n
    ts = [t_end]
    vs = [np.zeros(2)]
    t, v = t_end, np.zeros(2)
    for _ in range(n):
        k1 = M * np.asarray(w_slow(v, t))
        k2 = M * np.asarray(w_slow(v + 0.5 * dt * k1, t + 0.5 * dt))
        k3 = M * np.asarray(w_slow(v + 0.5 * dt * k2, t + 0.5 * dt))
        k4 = M * np.asarray(w_slow(v + dt * k3, t + dt))
        v = v + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t = t + dt
        ts.append(t)
        vs.append(v.copy())
    return RecenterPath(times=np.array(ts[::-1]), points=np.array(vs[::-1]))


# --- rescale / recenter bookkeeping ---


@dataclass
class RescaleOutcome:
    hypothesis_ok: bool  # |theta_tilde - m| <= rho^delta on Q_rho
    outside_ok: bool  # |theta_{k+1}| <= 2 |x|^(2 delta) for 1 < |x| <= margin
    max_inside: float  # sup |theta_{k+1}| over Q_1
    worst_outside_ratio: float  # sup over 1 < |x| of |theta_{k+1}| / (2 |x|^(2 delta))
    m: float
    M_next: float
    M_monotone: bool
    edge_margin: float
    checked_radius: float


def rescale_recenter(history, cyl, path, m, rho, delta, M_k, epsilon):
    """Produce the next iterate on the same grid layout.

    theta_next(x', t') = rho^(-delta) (theta(rho (x' - C) + center + V(tau),
    tau) - m) with tau = center_t - rho^alpha (1 - t'), C the domain center
    of the new frame.  Snapshots outside the time window are dropped; the
    remaining stamps are relabeled affinely to (0, 1].  The decay-hypothesis
    precondition and both outer bookkeeping bounds are measured on the
    produced fields (never assumed); violations are reported as flags, not
    exceptions.  The outer bound is checked up to EDGE_MARGIN of the window
    half-side: the zoomed patch is re-declared periodic, so the outermost
    rim carries interpolation mismatch and is excluded (flagged via
    edge_margin).
    """
    if not history:
        raise ValueError("empty history")
    grid = history[0].grid
    n = grid.n
    L = grid.side_length
    C = (0.5 * L, 0.5 * L)
    alpha = cyl.alpha
    rho_a = rho**alpha
    scale = rho ** (-delta)

    new_history = []
    for f in history:
        tau = f.time_stamp
        if not (cyl.center_t - rho_a - 1e-12 < tau <= cyl.center_t + 1e-12):
            continue
        t_new = 1.0 - (cyl.center_t - tau) / rho_a
        v = path.at(tau)
        offset = (
            cyl.center_x[0] + v[0] - rho * C[0],
            cyl.center_x[1] + v[1] - rho * C[1],
        )
        vals = evaluate_on_lattice(
            f, (offset[0], offset[1]), (rho * grid.spacing, rho * grid.spacing), (n, n)
        )
        new_history.append(ScalarField(grid, scale * (vals - m), t_new))
    if not new_history:
        raise ValueError("no snapshots fall inside the rescale window")

    d1, d2 = grid.displacement(C)
    r = np.sqrt(d1 * d1 + d2 * d2)
    inside = r < 1.0
    check_radius = EDGE_MARGIN * 0.5 * L
    outer = (r > 1.0) & (r <= check_radius)
    max_inside = 0.0
    worst_ratio = 0.0
    for f in new_history:
        max_inside = max(max_inside, float(np.max(np.abs(f.values[inside]))))
        envelope = 2.0 * r[outer] ** (2.0 * delta)
        worst_ratio = max(worst_ratio, float(np.max(np.abs(f.values[outer]) / envelope)))

    M_next = rho ** (delta - epsilon) * M_k
    outcome = RescaleOutcome(
        hypothesis_ok=bool(max_inside <= 1.0 + 1e-9),
        outside_ok=bool(worst_ratio <= 1.0 + 1e-9),
        max_inside=max_inside,
        worst_outside_ratio=worst_ratio,
        m=float(m),
        M_next=float(M_next),
        M_monotone=bool(M_next <= M_k * (1.0 + 1e-12)),
        edge_margin=EDGE_MARGIN,
        checked_radius=float(check_radius),
    )
    return new_history, outcome


def holder_estimate(theta, delta, min_sep, max_points=10_000):
    """Hoelder-delta difference quotient maximized over a decimated lattice.

    All pairs of a strided node subset (at most ``max_points`` nodes) with
    torus distance >= min_sep are scanned; distances use the minimal image.
    """
    grid = theta.grid
    if min_sep < 2.0 * grid.spacing:
        raise ValueError("min_sep must be at least two grid spacings")
    stride = 1
    while (grid.n // stride) ** 2 > max_points:
        stride *= 2  # power of two keeps the lattice aligned across sizes
    idx = np.arange(0, grid.n, stride)
    x = idx * grid.spacing
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    vals = theta.values[np.ix_(idx, idx)].ravel()
    L = grid.side_length
    best = 0.0
    chunk = 512
    for a in range(0, len(pts), chunk):
        pa = pts[a : a + chunk]
        va = vals[a : a + chunk]
        d1 = np.abs(pa[:, None, 0] - pts[None, :, 0])
        d2 = np.abs(pa[:, None, 1] - pts[None, :, 1])
        d1 = np.minimum(d1, L - d1)
        d2 = np.minimum(d2, L - d2)
        dist = np.hypot(d1, d2)
        diff = np.abs(va[:, None] - vals[None, :])
        ok = dist >= min_sep
        if np.any(ok):
            best = max(best, float(np.max(diff[ok] / dist[ok] ** delta)))
    return best


# --- the iteration driver ---


@dataclass
class OscillationRecord:
    step_index: int
    radius: float  # rho^k, the original-frame radius of the produced iterate
    oscillation: float  # osc of the produced iterate over Q_1
    raw_oscillation: float  # oscillation of the original field at this scale
    recenter_path: RecenterPath
    midrange: float
    M_k: float
    eta: float  # measured per-step improvement 1 - osc(Q_1/2)/osc(Q_1)
    w2_sup: float
    w3_sup: float
    max_shift: float
    containment_ok: bool
    bounds: RescaleOutcome
    truncated_split: bool

    def to_json(self):
        d = {
            "k": self.step_index,
            "r_k": self.radius,
            "osc": self.oscillation,
            "raw_osc": self.raw_oscillation,
            "max_V": self.max_shift,
            "m": self.midrange,
            "M_k": self.M_k,
            "eta": self.eta,
            "w2_sup": self.w2_sup,
            "w3_sup": self.w3_sup,
            "containment_ok": self.containment_ok,
            "hypothesis_ok": self.bounds.hypothesis_ok,
            "outside_ok": self.bounds.outside_ok,
            "M_monotone": self.bounds.M_monotone,
            "truncated_split": self.truncated_split,
        }
        return json.dumps(d)


@dataclass
class IterationConfig:
    rho: float
    M: float
    alpha: float
    steps: int = 4
    delta: float = None  # chosen from the step-1 eta when None
    ode_step_divisor: int = 64
    bound_sample_rings: int = 3
    per_ring_samples: int = 8


@dataclass
class IterationResult:
    records: list
    delta: float
    eta_min: float
    fitted_decay_exponent: float
    completed_steps: int
    failure: str = ""

    def report_lines(self):
        return [r.to_json() for r in self.records]


def iteration_snapshot_times(t_end, rho, alpha, steps, per_window=12):
    """Nested snapshot schedule resolving every rescaled window.

    Level k covers (t_end - rho^((k-1) alpha), t_end] with per_window
    uniform samples, so that after k - 1 rescalings the current frame still
    holds per_window snapshots.
    """
    times = {t_end}
    for k in range(steps + 1):
        width = rho ** (k * alpha)
        for i in range(per_window):
            times.add(t_end - width * (1.0 - i / per_window))
    return np.array(sorted(times))


def _bound_sample_points(grid, center, rings, per_ring):
    """Grid nodes near concentric rings in B_1(center), deduplicated."""
    h = grid.spacing
    pts = [
        (round(center[0] / h) * h % grid.side_length,
         round(center[1] / h) * h % grid.side_length)
    ]
    for q in range(1, rings + 1):
        rad = q / (rings + 1)
        for a in range(per_ring):
            ang = 2 * np.pi * a / per_ring
            p = (center[0] + rad * np.cos(ang), center[1] + rad * np.sin(ang))
            pts.append(
                (round(p[0] / h) * h % grid.side_length,
                 round(p[1] / h) * h % grid.side_length)
            )
    return sorted(set(pts))


def _window_splits(history, cyl, rho):
    """VelocitySplit per snapshot in the flow window (t_start, center_t]."""
    splits = {}
    for i, f in enumerate(history):
        if cyl.t_start - 1e-12 < f.time_stamp <= cyl.center_t + 1e-12:
            splits[i] = VelocitySplit(f, cyl.center_x, rho)
    return splits


def _slow_evaluator(history, splits, center):
    """Linear-in-time interpolation of the slow velocity between snapshots.

    The returned callable takes the displacement from the split center (the
    recentering ODE's unknown), not an absolute position.
    """
    idx = sorted(splits)
    times = np.array([history[i].time_stamp for i in idx])

    def w_slow(v, t):
        x = (center[0] + v[0], center[1] + v[1])
        j = int(np.clip(np.searchsorted(times, t) - 1, 0, len(idx) - 2))
        t0, t1 = times[j], times[j + 1]
        lam = 0.0 if t1 == t0 else np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
        a = splits[idx[j]].slow(x)
        b = splits[idx[j + 1]].slow(x)
        return (1 - lam) * a + lam * b

    return w_slow, [splits[i] for i in idx]


def run_iteration_suite(history, config):
    """Execute Step 1 and Steps k >= 2 of the oscillation iteration.

    Preconditions (checked): sup |theta| <= 1 over the history and tail
    integral <= 1 at the window start; times must be normalized to span
    (0, 1] (use normalize_window).  Each step measures the oscillation of
    the current iterate on Q_1 and Q_{1/2}, splits the velocity, bounds the
    slow components, solves the recentering ODE, verifies cylinder
    containment, and rescales.  Any precondition failure ends the suite
    with a structured report rather than an exception.
    """
    if not history:
        raise ValueError("empty history")
    grid = history[0].grid
    L = grid.side_length
    center = (0.5 * L, 0.5 * L)
    times = np.array([f.time_stamp for f in history])
    sup_all = max(float(np.max(np.abs(f.values))) for f in history)
    if sup_all > 1.0 + 1e-9:
        raise ValueError(f"history is not normalized: sup|theta| = {sup_all:.3f} > 1")
    tail0 = tail_integral(history[0], center)
    if tail0 > 1.0 + 1e-9:
        raise ValueError(f"tail at window start = {tail0:.3f} > 1")

    rho, alpha, M = config.rho, config.alpha, config.M
    epsilon = 1.0 - alpha
    sample_pts = _bound_sample_points(
        grid, center, config.bound_sample_rings, config.per_ring_samples
    )

    records = []
    current = history
    M_k = M
    delta = config.delta
    eta_min = np.inf
    amplitude = 1.0  # accumulated rho^(delta * (k-1)) factor, original units
    failure = ""

    for k in range(1, config.steps + 1):
        q1 = ParabolicCylinder(center, 1.0, 1.0, alpha)
        q_half = q1.shrunk(0.5)
        osc_full = oscillation(current, q1)
        osc_half = oscillation(current, q_half)
        if osc_full <= 1e-13:
            failure = f"degenerate success: zero oscillation at step {k}"
            break
        eta_k = 1.0 - osc_half / osc_full
        eta_min = min(eta_min, eta_k)
        if delta is None:
            if eta_k <= 0:
                failure = f"no oscillation improvement at step {k} (eta = {eta_k:.3f})"
                break
            delta = choose_delta(rho, eta_k)

        # velocity split over the flow window; step 1 uses the two-piece split
        split_rho = None if k == 1 else rho
        flow_cyl = ParabolicCylinder(center, 1.0, rho, alpha)
        splits = _window_splits(current, flow_cyl, split_rho)
        if not splits:
            failure = f"no snapshots in the flow window at step {k}"
            break
        w_slow, split_list = _slow_evaluator(current, splits, center)
        w2_sup = 0.0
        w3_sup = 0.0
        for sp in split_list:
            s2, s3 = sp.sup_slow_components(sample_pts)
            w2_sup = max(w2_sup, s2)
            w3_sup = max(w3_sup, s3)

        path = recenter_flow(
            w_slow,
            M_k,
            t_start=1.0 - rho**alpha,
            t_end=1.0,
            max_step=rho**alpha / config.ode_step_divisor,
        )
        containment_ok = path.max_abs + rho <= 0.5 + 1e-9

        # midrange over the recentered Q_{1/2}
        sel = [
            (i, f)
            for i, f in enumerate(current)
            if flow_cyl.t_start - 1e-12 < f.time_stamp <= 1.0 + 1e-12
        ]
        shifts = [tuple(path.at(f.time_stamp)) for _, f in sel]
        vmax, vmin = -np.inf, np.inf
        for (i, f), sh in zip(sel, shifts):
            mask = q_half.space_mask(grid, sh)
            vals = f.values[mask]
            vmax = max(vmax, float(vals.max()))
            vmin = min(vmin, float(vals.min()))
        m = 0.5 * (vmax + vmin)
        m = float(np.clip(m, -1.0 + rho**delta, 1.0 - rho**delta))

        new_history, outcome = rescale_recenter(
            current, flow_cyl, path, m, rho, delta, M_k, epsilon
        )
        d1, d2 = grid.displacement(center)
        inside = d1 * d1 + d2 * d2 < 1.0
        new_max = max(float(f.values[inside].max()) for f in new_history)
        new_min = min(float(f.values[inside].min()) for f in new_history)
        produced_osc = new_max - new_min
        amplitude *= rho**delta
        truncated = any(sp.truncated for sp in split_list)
        records.append(
            OscillationRecord(
                step_index=k,
                radius=rho**k,
                oscillation=produced_osc,
                raw_oscillation=produced_osc * amplitude,
                recenter_path=path,
                midrange=m,
                M_k=M_k,
                eta=eta_k,
                w2_sup=w2_sup,
                w3_sup=w3_sup,
                max_shift=path.max_abs,
                containment_ok=containment_ok,
                bounds=outcome,
                truncated_split=truncated,
            )
        )
        if not outcome.hypothesis_ok:
            failure = f"decay hypothesis |theta - m| <= rho^delta failed at step {k}"
            break
        if not containment_ok:
            failure = f"cylinder containment failed at step {k}"
            break
        current = new_history
        M_k = outcome.M_next

    if records:
        ks = np.array([r.step_index for r in records], dtype=float)
        raws = np.array([max(r.raw_oscillation, 1e-300) for r in records])
        if len(records) >= 2:
            slope = np.polyfit(ks * np.log(rho), np.log(raws), 1)[0]
        else:
            slope = np.nan
    else:
        slope = np.nan
    return IterationResult(
        records=records,
        delta=float(delta) if delta is not None else np.nan,
        eta_min=float(eta_min) if np.isfinite(eta_min) else np.nan,
        fitted_decay_exponent=float(slope),
        completed_steps=len(records),
        failure=failure,
    )


def normalize_window(history, t_end=None):
    """Rescale a raw history to the normalized iteration setup.

    Selects snapshots in (t_end - 1, t_end], relabels times to (0, 1], and
    divides values by s = max(sup |theta|, tail at window start), so that
    both normalization preconditions hold; returns (new history, M = s).
    """
    if not history:
        raise ValueError("empty history")
    if t_end is None:
        t_end = history[-1].time_stamp
    grid = history[0].grid
    center = (0.5 * grid.side_length, 0.5 * grid.side_length)
    window = [f for f in history if t_end - 1.0 - 1e-9 <= f.time_stamp <= t_end + 1e-9]
    if not window:
        raise ValueError("no snapshots in the unit window")
    sup = max(float(np.max(np.abs(f.values))) for f in window)
    tail0 = tail_integral(window[0], center)
    s = max(sup, tail0, 1e-300)
    out = [
        ScalarField(grid, f.values / s, f.time_stamp - (t_end - 1.0))
        for f in window
    ]
    return out, float(s)
