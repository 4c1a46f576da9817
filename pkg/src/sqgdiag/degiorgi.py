"""Numerical checks of the two De Giorgi-type building blocks.

Both live on weighted half-balls B_r^* = B_r x [0, r) with the measure
z^eps dX.  The isoperimetric bound

    |{w <= 0}| |{w >= 1}| <= C |{0 < w < 1}|^(1/2) ||w||_{Hdot^1(z^eps)}

is a property of H^1 functions; the local energy bound controls the growth
of level-set energy of a solution under a compactly supported cutoff.  Both
constants are non-constructive in the analysis, so the suite calibrates
them once on a declared family and freezes the values below.

Set measures are Monte Carlo estimates (the sets have irregular boundaries,
and the standard error gives a quantified tolerance); gradients of sampled
fields use centered differences on the extension grid, one-sided at z = 0,
where the vanishing weight suppresses the boundary stencil error.
"""

from dataclasses import dataclass

import numpy as np

from .extension import ExtensionField, extend, weighted_dirichlet_energy, weighted_z_integral
from .spectral import Grid, ScalarField, random_band_limited

# Frozen calibration outputs (see calibrate_isoperimetric_constant and
# calibrate_local_energy_constant; the acceptance suite re-derives both and
# asserts the frozen values still cover the families).
ISOPERIMETRIC_CONSTANT = 0.65
LOCAL_ENERGY_CONSTANT = 2.0

REGION_RADII = {"half_ball_B1star": 1.0, "half_ball_B2star": 2.0}
MC_CHUNK = 1 << 16


@dataclass(frozen=True)
class WeightedRegion:
    """Monte Carlo sampling plan for a weighted half-ball."""

    region: str = "half_ball_B1star"
    weight_exponent: float = 0.0
    sample_count: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.region not in REGION_RADII:
            raise ValueError(f"unknown region {self.region!r}")
        if self.sample_count <= 0:
            raise ValueError("sample_count must be positive")

    @property
    def radius(self):
        return REGION_RADII[self.region]

    def volume(self):
        r = self.radius
        return np.pi * r * r * r  # disk area times height

    def sample_points(self):
        """Deterministic samples, chunked over sub-streams of the seed.

        Sub-stream i is seeded with [seed, 1, i]; chunks are concatenated in
        fixed order, so results are bit-reproducible for a fixed seed
        regardless of how the chunks are evaluated.
        """
        r = self.radius
        n = self.sample_count
        chunks = []
        for i in range((n + MC_CHUNK - 1) // MC_CHUNK):
            m = min(MC_CHUNK, n - i * MC_CHUNK)
            rng = np.random.default_rng([self.seed, 1, i])
            u = rng.random((3, m))
            rad = r * np.sqrt(u[0])
            ang = 2.0 * np.pi * u[1]
            z = r * u[2]
            chunks.append(np.stack([rad * np.cos(ang), rad * np.sin(ang), z]))
        return np.concatenate(chunks, axis=1)


def interpolate_extension(ext, x1, x2, z, center=None):
    """Trilinear sampling of an extension field at points relative to center.

    Periodic in the horizontal directions, linear in z with clamping to the
    sampled range.
    """
    grid = ext.base_grid
    if center is None:
        c = 0.5 * grid.side_length
        center = (c, c)
    h = grid.spacing
    n = grid.n
    p1 = (np.asarray(x1) + center[0]) / h
    p2 = (np.asarray(x2) + center[1]) / h
    i0 = np.floor(p1).astype(int)
    j0 = np.floor(p2).astype(int)
    f1 = p1 - i0
    f2 = p2 - j0
    i0 %= n
    j0 %= n
    i1 = (i0 + 1) % n
    j1 = (j0 + 1) % n

    zl = ext.z_levels
    zi = np.clip(np.searchsorted(zl, z, side="right") - 1, 0, len(zl) - 2)
    z0 = zl[zi]
    z1v = zl[zi + 1]
    fz = np.clip((np.asarray(z) - z0) / (z1v - z0), 0.0, 1.0)

    lo = ext.values[zi, i0, j0] * (1 - f1) * (1 - f2) + ext.values[
        zi, i1, j0
    ] * f1 * (1 - f2) + ext.values[zi, i0, j1] * (1 - f1) * f2 + ext.values[
        zi, i1, j1
    ] * f1 * f2
    hi = ext.values[zi + 1, i0, j0] * (1 - f1) * (1 - f2) + ext.values[
        zi + 1, i1, j0
    ] * f1 * (1 - f2) + ext.values[zi + 1, i0, j1] * (1 - f1) * f2 + ext.values[
        zi + 1, i1, j1
    ] * f1 * f2
    return lo * (1 - fz) + hi * fz


PREDICATES = {
    "le_zero": lambda w: w <= 0.0,
    "ge_one": lambda w: w >= 1.0,
    "between": lambda w: (w > 0.0) & (w < 1.0),
}


def weighted_measure(ext, predicate, eps, mc, center=None):
    """Monte Carlo estimate of int_{set} z^eps dX over the sampling region.

    Returns (estimate, standard_error); deterministic for a fixed seed.
    """
    if predicate not in PREDICATES:
        raise ValueError(f"unknown predicate {predicate!r}")
    pts = mc.sample_points()
    if pts.shape[1] == 0:
        raise ValueError("zero samples")
    w = interpolate_extension(ext, pts[0], pts[1], pts[2], center=center)
    values = np.where(PREDICATES[predicate](w), pts[2] ** eps, 0.0)
    vol = mc.volume()
    est = vol * float(values.mean())
    se = vol * float(values.std(ddof=1)) / np.sqrt(values.size)
    return est, se


def clamp_unit(ext):
    """Clamp field values to [0, 1] (the isoperimetric normalization)."""
    return ExtensionField(
        ext.base_grid,
        ext.z_levels,
        np.clip(ext.values, 0.0, 1.0),
        ext.weight_exponent,
    )


def extension_gradient_squared(ext):
    """|grad w|^2 on the extension grid, centered differences.

    Horizontal derivatives wrap periodically; the z stencil is one-sided at
    the first and last level.
    """
    v = ext.values
    h = ext.base_grid.spacing
    g1 = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * h)
    g2 = (np.roll(v, -1, axis=2) - np.roll(v, 1, axis=2)) / (2 * h)
    z = ext.z_levels
    gz = np.empty_like(v)
    gz[1:-1] = (v[2:] - v[:-2]) / (z[2:] - z[:-2])[:, None, None]
    gz[0] = (v[1] - v[0]) / (z[1] - z[0])
    gz[-1] = (v[-1] - v[-2]) / (z[-1] - z[-2])
    return g1 * g1 + g2 * g2 + gz * gz


@dataclass
class IsoperimetricResult:
    lhs: float
    rhs: float
    lhs_std_error: float
    rhs_std_error: float
    measures: dict
    passed: bool


def isoperimetric_check(ext, eps, constant_C, mc, center=None):
    """Evaluate both sides of the weighted isoperimetric bound.

    The field is clamped to [0, 1] before the gradient is taken.  All four
    integrals share one sample set (common random numbers), which makes the
    w -> 1 - w swap invariance exact up to rounding.  Pass criterion:
    lhs <= C * rhs + 3 combined standard errors.
    """
    clamped = clamp_unit(ext)
    grad_sq = extension_gradient_squared(clamped)
    grad_ext = ExtensionField(ext.base_grid, ext.z_levels, grad_sq, eps)

    pts = mc.sample_points()
    w = interpolate_extension(ext, pts[0], pts[1], pts[2], center=center)
    g = interpolate_extension(grad_ext, pts[0], pts[1], pts[2], center=center)
    zw = pts[2] ** eps
    vol = mc.volume()
    n = w.size

    def mc_mean(samples):
        return (
            vol * float(samples.mean()),
            vol * float(samples.std(ddof=1)) / np.sqrt(n),
        )

    m_low, se_low = mc_mean(np.where(w <= 0.0, zw, 0.0))
    m_high, se_high = mc_mean(np.where(w >= 1.0, zw, 0.0))
    m_strip, se_strip = mc_mean(np.where((w > 0.0) & (w < 1.0), zw, 0.0))
    m_grad, se_grad = mc_mean(g * zw)

    lhs = m_low * m_high
    lhs_se = np.hypot(m_high * se_low, m_low * se_high)
    root = np.sqrt(max(m_strip, 0.0) * max(m_grad, 0.0))
    rhs = constant_C * root
    if root > 0:
        rhs_se = 0.5 * constant_C * np.hypot(
            se_strip * np.sqrt(m_grad / m_strip), se_grad * np.sqrt(m_strip / m_grad)
        )
    else:
        rhs_se = 0.0
    combined = np.hypot(lhs_se, rhs_se)
    return IsoperimetricResult(
        lhs=lhs,
        rhs=rhs,
        lhs_std_error=lhs_se,
        rhs_std_error=rhs_se,
        measures={
            "low": (m_low, se_low),
            "high": (m_high, se_high),
            "strip": (m_strip, se_strip),
            "gradient": (m_grad, se_grad),
        },
        passed=bool(lhs <= rhs + 3.0 * combined),
    )


def isoperimetric_family(count, epsilon, seed, grid=None, n_z=33):
    """The declared calibration family: extensions of shifted random traces.

    Band limit 4, trace rescaled to peak 1.5 and shifted by +0.5 so that the
    sets {w <= 0} and {w >= 1} are generically nonempty on B_1^*.
    """
    if grid is None:
        grid = Grid(64, 4.0)
    z_levels = np.linspace(0.0, 1.0, n_z)
    fields = []
    for i in range(count):
        trace = random_band_limited(grid, 4, [seed, 2, i], amplitude=1.5)
        shifted = ScalarField(grid, trace.values + 0.5)
        fields.append(extend(shifted, z_levels, epsilon))
    return fields


def linear_reference_profile(epsilon, grid=None, n_z=33):
    """w(X) = 2 X_1 on B_1^*: every set measure has a closed form.

    Half-disk pi/2 for {w <= 0}, circular segment pi/3 - sqrt(3)/4 for
    {w >= 1} (unweighted), gradient 2 on the strip after clamping.  This is
    the binding member of the calibration family: the random members need a
    far smaller constant.
    """
    if grid is None:
        grid = Grid(128, 4.0)
    z_levels = np.linspace(0.0, 1.0, n_z)
    c = 0.5 * grid.side_length
    d1, _ = grid.displacement((c, c))
    vals = np.broadcast_to(2.0 * d1, (n_z, grid.n, grid.n)).copy()
    return ExtensionField(grid, z_levels, vals, epsilon)


def isoperimetric_ratio(ext, eps, mc, center=None):
    """lhs / (strip^(1/2) grad^(1/2)): the constant this field requires."""
    res = isoperimetric_check(ext, eps, 1.0, mc, center=center)
    if res.rhs <= 0.0:
        return 0.0 if res.lhs <= 0.0 else np.inf
    return res.lhs / res.rhs


def calibrate_isoperimetric_constant(
    count=100, epsilons=(0.0, 0.1), seed=2025, sample_count=200_000, headroom=1.25
):
    """Max required constant over the declared family, with headroom.

    The frozen ISOPERIMETRIC_CONSTANT was produced by this routine; the
    acceptance suite re-runs it and asserts the frozen value still covers
    the family.
    """
    worst = 0.0
    for eps in epsilons:
        mc = WeightedRegion(
            region="half_ball_B1star",
            weight_exponent=eps,
            sample_count=sample_count,
            seed=seed,
        )
        fields = [linear_reference_profile(eps)]
        fields += isoperimetric_family(count, eps, seed)
        for ext in fields:
            worst = max(worst, isoperimetric_ratio(ext, eps, mc))
    return headroom * worst


# --- local energy inequality ---


@dataclass
class LocalEnergyResult:
    lhs_terms: dict
    rhs_terms: dict
    constant: float
    budget: float
    velocity_norm: float  # sup_t ||w||_{L^(2n/alpha)(B_2)}
    passed: bool


def velocity_local_norm(vel, alpha, center=None, radius=2.0):
    """||w||_{L^(2n/alpha)(B_radius)} on the grid (n = 2)."""
    grid = vel.grid
    if center is None:
        c = 0.5 * grid.side_length
        center = (c, c)
    d1, d2 = grid.displacement(center)
    inside = d1 * d1 + d2 * d2 < radius * radius
    p = 4.0 / alpha
    speed = np.sqrt(vel.u**2 + vel.v**2)
    return float(
        (np.sum(np.where(inside, speed**p, 0.0)) * grid.spacing**2) ** (1.0 / p)
    )


def extension_cutoff(grid, z_levels, center=None, r_flat=1.0, r_support=1.9):
    """Smooth cutoff supported in B_2^*: 1 on B_r_flat^*, 0 outside.

    Quintic smoothstep in |x| and in z, so the gradient is bounded and
    continuous.  Returns an array shaped (n_z, n, n).
    """
    if center is None:
        c = 0.5 * grid.side_length
        center = (c, c)
    if not (0.0 < r_flat < r_support <= 2.0):
        raise ValueError("need 0 < r_flat < r_support <= 2")

    def smooth(t):
        t = np.clip(t, 0.0, 1.0)
        return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))

    d1, d2 = grid.displacement(center)
    r = np.sqrt(d1 * d1 + d2 * d2)
    radial = smooth((r - r_flat) / (r_support - r_flat))
    z = np.asarray(z_levels, dtype=float)
    axial = smooth((z - r_flat) / (r_support - r_flat))
    return axial[:, None, None] * radial[None, :, :]


def local_energy_check(history, velocities, cutoff, level, t1, t2, C1, center=None):
    """Quadrature check of the cutoff level-set energy inequality.

    history: ExtensionField snapshots; velocities: VelocityField snapshots
    on the same time grid (validated).  All integrals of the bound are
    evaluated with the z^eps-weighted trapezoid in z, grid sums in x and
    trapezoid in t; the declared budget adds the per-snapshot quadrature
    estimates and a relative floor.  Returns terms, budget and pass flag.
    """
    times = np.array([ext.time_stamp for ext in history])
    vtimes = np.array([getattr(v, "time_stamp", t) for v, t in zip(velocities, times)])
    if len(history) != len(velocities) or np.max(np.abs(times - vtimes)) > 1e-9:
        raise ValueError("history and velocity time grids mismatched")
    sel = np.where((times >= t1 - 1e-12) & (times <= t2 + 1e-12))[0]
    if len(sel) < 2:
        raise ValueError("need at least two snapshots in [t1, t2]")

    eps = history[0].weight_exponent
    grid = history[0].base_grid
    alpha = 1.0 - eps
    h2 = grid.spacing**2
    cut = np.asarray(cutoff, dtype=float)
    if cut.ndim == 2:
        cut = cut[None, :, :]

    # finite-difference gradient of the cutoff (one-sided in z at the ends)
    cut_ext = ExtensionField(grid, history[0].z_levels, cut * np.ones_like(history[0].values), eps)
    grad_eta_sq = extension_gradient_squared(cut_ext)

    grad_term = np.empty(len(sel))
    grad_err = np.empty(len(sel))
    rhs_x = np.empty(len(sel))
    rhs_ext = np.empty(len(sel))
    boundary_energy = np.empty(len(sel))
    vnorms = np.empty(len(sel))
    for idx, j in enumerate(sel):
        ext = history[j]
        psi = np.maximum(ext.values - level, 0.0)
        psi_ext = ExtensionField(grid, ext.z_levels, psi, eps)
        grad_term[idx], grad_err[idx] = weighted_dirichlet_energy(psi_ext, cut)
        eta0 = cut[0]
        boundary_energy[idx] = np.sum((eta0 * psi[0]) ** 2) * h2
        rhs_x[idx] = np.sum(grad_eta_sq[0] * psi[0] ** 2) * h2
        per_level = np.sum(grad_eta_sq * psi**2, axis=(1, 2)) * h2
        rhs_ext[idx] = weighted_z_integral(ext.z_levels, per_level, eps)
        vnorms[idx] = velocity_local_norm(velocities[j], alpha, center=center)

    tt = times[sel]
    def time_trapezoid(series):
        return float(np.sum(0.5 * (series[1:] + series[:-1]) * np.diff(tt)))

    lhs_grad = time_trapezoid(grad_term)
    lhs = {"dissipation": lhs_grad, "end_energy": float(boundary_energy[-1])}
    rhs = {
        "start_energy": float(boundary_energy[0]),
        "cutoff_gradient_trace": time_trapezoid(rhs_x),
        "cutoff_gradient_extension": time_trapezoid(rhs_ext),
    }
    budget = 1e-6 * rhs["start_energy"] + time_trapezoid(grad_err)
    if len(tt) > 2:
        for series in (grad_term, boundary_energy):
            curv = np.abs(np.diff(series, 2))
            budget += float(np.sum(curv)) * float(np.mean(np.diff(tt))) / 12.0
    total_lhs = lhs["dissipation"] + lhs["end_energy"]
    total_rhs = rhs["start_energy"] + C1 * (
        rhs["cutoff_gradient_trace"] + rhs["cutoff_gradient_extension"]
    )
    return LocalEnergyResult(
        lhs_terms=lhs,
        rhs_terms=rhs,
        constant=C1,
        budget=budget,
        velocity_norm=float(np.max(vnorms)),
        passed=bool(total_lhs <= total_rhs + budget),
    )
