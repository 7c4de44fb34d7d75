"""Radial exterior-domain finite-difference evolution.

Solves u_tt = u_rr + (2/r) u_r + N(u, u_t, u_r) + forcing on r in [r_b, r_max]
with homogeneous Dirichlet conditions at both ends.  The substitution w = r u
removes the first-order transport term, giving w_tt = w_rr + r * (N + forcing)
with w(r_b) = w(r_max) = 0; the outer condition is exact by finite propagation
speed provided r_max >= r_b + t_max + (data support radius) + 2.

The scheme is explicit leapfrog, second order in space and time.  The first
step is seeded with the Taylor expansion u(dt) = psi_0 + dt psi_1 + dt^2/2
psi_2 built from the compatibility jet.  When N depends on u_t the update is
implicit through the centered difference (u^{n+1} - u^{n-1})/(2 dt); two
fixed-point sweeps starting from the lagged value resolve it.

All dynamics run in Minkowski coordinates (fixed boundary r = r_b); fields on
the cylinder are produced afterwards by pushing stored frames through the
compactifying map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import compat, cylinder, geometry
from .errors import (
    ConfigError,
    CoverageError,
    NaNError,
    RangeError,
    StabilityError,
)

__all__ = [
    "DataSpec",
    "SolverConfig",
    "MonitorSeries",
    "EnergyReport",
    "Trajectory",
    "CylinderGrid",
    "run",
    "evaluate",
    "sample",
    "transform_to_cylinder",
    "monitors",
    "reference_samples",
    "DEFAULT_BANDS",
]

DEFAULT_BANDS = (0.0, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class DataSpec:
    """Gaussian-bump Cauchy data: f = f_amp * bump, g = g_amp * bump."""

    center: float = 1.5
    width: float = 0.25
    f_amp: float = 0.0
    g_amp: float = 1.0

    @property
    def support_radius(self) -> float:
        """Outer radius beyond which the data is numerically zero."""
        return self.center + 6.0 * self.width

    @property
    def inner_radius(self) -> float:
        return max(self.center - 6.0 * self.width, 0.0)

    def profiles(self, r0, r_max, dr, epsilon):
        bump_f = compat.gaussian_bump(self.center, self.width, epsilon * self.f_amp)
        bump_g = compat.gaussian_bump(self.center, self.width, epsilon * self.g_amp)
        f = compat.RadialProfile.from_callable(bump_f, r0, r_max, dr)
        g = compat.RadialProfile.from_callable(bump_g, r0, r_max, dr)
        return f, g


@dataclass(frozen=True)
class SolverConfig:
    obs: geometry.ObstacleSpec = field(default_factory=lambda: geometry.ObstacleSpec(0.2))
    nonlinearity: compat.NonlinearitySpec = compat.ZERO
    data: DataSpec = field(default_factory=DataSpec)
    epsilon: float = 0.01
    dr: float = 5e-3
    cfl: float = 0.45
    t_max: float = 80.0
    r_max: float = 90.0
    snapshot_stride: int | None = None
    monitor_stride: int = 4
    frame_decimation: int = 1
    local_radius: float | None = None
    band_offsets: tuple[float, ...] = DEFAULT_BANDS
    forcing_fn: object = None

    @property
    def dt(self) -> float:
        return self.cfl * self.dr

    def validate(self):
        if self.cfl > 0.9:
            raise StabilityError(f"cfl = {self.cfl} exceeds the 0.9 stability ceiling")
        if self.cfl <= 0:
            raise ConfigError("cfl must be positive")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        bound = self.obs.r_b + self.t_max + self.data.support_radius + 2.0
        if self.r_max < bound:
            raise ConfigError(
                f"r_max = {self.r_max} violates the no-reflection bound "
                f"r_b + t_max + support + 2 = {bound:.3f}"
            )


@dataclass(frozen=True)
class MonitorSeries:
    t: np.ndarray
    E_total: np.ndarray
    E_local: np.ndarray
    sup_u: np.ndarray
    bands: dict[float, np.ndarray]
    local_radius: float


@dataclass(frozen=True)
class EnergyReport:
    t: np.ndarray
    E_total: np.ndarray
    E_local: np.ndarray
    local_radius: float


@dataclass(frozen=True)
class Trajectory:
    """Stored evolution: frames on a (possibly decimated) radial grid plus monitors."""

    r: np.ndarray
    times: np.ndarray
    u_frames: np.ndarray
    ut_frames: np.ndarray
    monitors: MonitorSeries
    config: SolverConfig
    completed: bool = True

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("frame times must be strictly increasing")

    @property
    def ur_frames(self) -> np.ndarray:
        cached = getattr(self, "_ur_cache", None)
        if cached is None:
            cached = np.gradient(self.u_frames, self.r, axis=1)
            object.__setattr__(self, "_ur_cache", cached)
        return cached


def _energy(u_t, u_r, r, dr):
    return 4.0 * math.pi * np.trapezoid((u_t ** 2 + u_r ** 2) * r ** 2, dx=dr)


def run(config: SolverConfig) -> Trajectory:
    """Evolve the exterior problem; see the module docstring for the scheme.

    Raises StabilityError / ConfigError on bad configuration and NaNError on
    blow-up (the exception carries the partial trajectory as ``.trajectory``).
    """
    config.validate()
    r_b = config.obs.r_b
    dr, dt = config.dr, config.dt
    n = int(round((config.r_max - r_b) / dr))
    r = r_b + dr * np.arange(n + 1)
    f, g = config.data.profiles(r_b, r[-1], dr, config.epsilon)
    jet = compat.compute_jet(f, g, config.nonlinearity, K=2)

    n_steps = int(round(config.t_max / dt))
    stride = config.snapshot_stride or max(1, int(round(0.05 / dt)))
    dec = max(1, config.frame_decimation)
    rho = config.local_radius if config.local_radius is not None else 2.0 * r_b
    local_sel = r <= rho
    forcing = config.forcing_fn

    def nonlin(u, u_t, u_r, t):
        out = config.nonlinearity(u, u_t, u_r, r)
        if forcing is not None:
            out = out + forcing(t, r)
        return out

    has_nonlin = (not config.nonlinearity.is_trivial) or forcing is not None

    w_prev = r * jet.psi[0].values
    w_prev[0] = w_prev[-1] = 0.0
    w_curr = r * (jet.psi[0].values + dt * jet.psi[1].values + 0.5 * dt ** 2 * jet.psi[2].values)
    w_curr[0] = w_curr[-1] = 0.0

    frames_t, frames_u, frames_ut = [], [], []
    mon_t, mon_E, mon_El, mon_sup = [], [], [], []
    mon_bands = {b: [] for b in config.band_offsets}

    def record(level, u, u_t, u_r, t):
        if level % config.monitor_stride == 0 or level == n_steps:
            mon_t.append(t)
            mon_E.append(_energy(u_t, u_r, r, dr))
            mon_El.append(
                4.0 * math.pi * np.trapezoid(((u_t ** 2 + u_r ** 2) * r ** 2)[local_sel], dx=dr)
            )
            mon_sup.append(float(np.max(np.abs(u))))
            for b in config.band_offsets:
                rb_pt = t - b
                val = float(np.interp(rb_pt, r, u)) if r[0] <= rb_pt <= r[-1] else 0.0
                mon_bands[b].append(val)
        if level % stride == 0 or level == n_steps:
            frames_t.append(t)
            frames_u.append(u[::dec].copy())
            frames_ut.append(u_t[::dec].copy())

    # level 0
    u0 = jet.psi[0].values.copy()
    record(0, u0, jet.psi[1].values, deriv_r(w_prev, r, dr), 0.0)

    def partial_trajectory(completed):
        return Trajectory(
            r=r[::dec].copy(),
            times=np.asarray(frames_t),
            u_frames=np.asarray(frames_u),
            ut_frames=np.asarray(frames_ut),
            monitors=MonitorSeries(
                t=np.asarray(mon_t),
                E_total=np.asarray(mon_E),
                E_local=np.asarray(mon_El),
                sup_u=np.asarray(mon_sup),
                bands={b: np.asarray(v) for b, v in mon_bands.items()},
                local_radius=rho,
            ),
            config=config,
            completed=completed,
        )

    inv_r = 1.0 / r
    for level in range(1, n_steps):
        t_here = level * dt
        w_rr = np.zeros_like(w_curr)
        w_rr[1:-1] = (w_curr[2:] - 2.0 * w_curr[1:-1] + w_curr[:-2]) / dr ** 2
        base = 2.0 * w_curr - w_prev + dt ** 2 * w_rr
        if has_nonlin:
            u = w_curr * inv_r
            u_r = deriv_r(w_curr, r, dr)
            u_t = (w_curr - w_prev) / dt * inv_r  # lagged first guess
            w_next = base
            prev_delta = None
            for _ in range(2):
                w_next_new = base + dt ** 2 * r * nonlin(u, u_t, u_r, t_here)
                w_next_new[0] = w_next_new[-1] = 0.0
                delta = float(np.max(np.abs(w_next_new - w_next)))
                if prev_delta is not None and delta > 2.0 * prev_delta and delta > 1e-6:
                    raise StabilityError(
                        f"fixed-point sweep diverging at t = {t_here:.4f}"
                    )
                prev_delta = delta
                w_next = w_next_new
                u_t = (w_next - w_prev) / (2.0 * dt) * inv_r
        else:
            w_next = base
            w_next[0] = w_next[-1] = 0.0
        w_next[0] = w_next[-1] = 0.0

        if level % 50 == 0 or level == n_steps - 1:
            peak = float(np.max(np.abs(w_next)))
            if not math.isfinite(peak) or peak > 1e12:
                exc = NaNError(f"nonfinite values at t = {t_here:.4f}")
                exc.trajectory = partial_trajectory(completed=False)
                raise exc

        u = w_curr * inv_r
        u_t = (w_next - w_prev) / (2.0 * dt) * inv_r
        u_rad = deriv_r(w_curr, r, dr)
        record(level, u, u_t, u_rad, t_here)
        w_prev, w_curr = w_curr, w_next

    # final level: one-sided u_t from the last two kept levels
    u = w_curr * inv_r
    u_t = (w_curr - w_prev) / dt * inv_r
    record(n_steps, u, u_t, deriv_r(w_curr, r, dr), n_steps * dt)
    return partial_trajectory(completed=True)


def deriv_r(w, r, dr):
    """u_r from w = r u: (dw/dr) / r - w / r^2, centered inside, one-sided at ends."""
    dw = np.empty_like(w)
    dw[1:-1] = (w[2:] - w[:-2]) / (2.0 * dr)
    dw[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * dr)
    dw[-1] = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dr)
    return dw / r - w / r ** 2


def sample(traj: Trajectory, t, r):
    """Vectorized bilinear interpolation of (u, u_t, u_r) at (t, r) arrays."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    times, radii = traj.times, traj.r
    if np.any(t < times[0] - 1e-12) or np.any(t > times[-1] + 1e-12):
        raise RangeError("time outside the stored window")
    if np.any(r < radii[0] - 1e-12) or np.any(r > radii[-1] + 1e-12):
        raise RangeError("radius outside the stored grid")
    it = np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2)
    ir = np.clip(np.searchsorted(radii, r) - 1, 0, len(radii) - 2)
    wt = np.clip((t - times[it]) / (times[it + 1] - times[it]), 0.0, 1.0)
    wr = np.clip((r - radii[ir]) / (radii[ir + 1] - radii[ir]), 0.0, 1.0)

    def bilin(frames):
        f00 = frames[it, ir]
        f01 = frames[it, ir + 1]
        f10 = frames[it + 1, ir]
        f11 = frames[it + 1, ir + 1]
        return (
            f00 * (1 - wt) * (1 - wr)
            + f01 * (1 - wt) * wr
            + f10 * wt * (1 - wr)
            + f11 * wt * wr
        )

    return bilin(traj.u_frames), bilin(traj.ut_frames), bilin(traj.ur_frames)


def evaluate(traj: Trajectory, t: float, r: float):
    """Pointwise (u, u_t, u_r); RangeError outside the stored domain."""
    u, u_t, u_r = sample(traj, [t], [r])
    return float(u[0]), float(u_t[0]), float(u_r[0])


@dataclass(frozen=True)
class CylinderGrid:
    """Requested (T, R) lattice for the pushforward of a trajectory."""

    n_T: int = 160
    n_R: int = 400
    T_min: float = 0.0
    T_max: float | None = None
    margin: float = 2.0


def transform_to_cylinder(traj: Trajectory, grid: CylinderGrid) -> cylinder.CylinderField:
    """Push a trajectory forward to the cylinder: v = u~ / Omega on a (T, R) grid.

    First derivatives of v are assembled by the chain rule from the stored
    (u_t, u_r) and the analytic frame Jacobian, avoiding grid differencing of
    interpolated values.  Nodes below the obstacle boundary curve or with
    preimage outside the stored coverage are masked out.  Raises
    CoverageError when the stored t_max cannot support a requested row even
    at the boundary.
    """
    t_cap = traj.times[-1] - grid.margin
    if t_cap <= 0:
        raise CoverageError("trajectory too short for any cylinder row")
    T_cap = 2.0 * math.atan(t_cap)
    if grid.T_max is not None:
        T_max = grid.T_max
        if T_max > T_cap:
            raise CoverageError(
                f"row T = {T_max:.4f} needs t > {t_cap:.2f}; "
                f"stored t_max is {traj.times[-1]:.2f}"
            )
    else:
        # highest row whose first off-pole grid node (R = one spacing) still
        # has a Minkowski preimage within coverage
        dRg = math.pi / (grid.n_R - 1)

        def overshoot(Tv):
            a = math.tan(0.5 * (Tv + dRg))
            b = math.tan(0.5 * (Tv - dRg))
            return 0.5 * (a + b) - t_cap

        from scipy.optimize import brentq

        hi = math.pi - dRg - 1e-9
        T_max = T_cap - 1e-6 if overshoot(hi) < 0 else float(
            brentq(overshoot, dRg + 1e-9, hi)
        ) - 1e-9
        T_max = min(T_max, T_cap - 1e-6)
    T = np.linspace(grid.T_min, T_max, grid.n_T)
    R = np.linspace(0.0, math.pi, grid.n_R)
    obs = traj.config.obs
    phi = np.array([geometry.boundary_curve(obs, Ti) for Ti in T])

    TT, RR = np.meshgrid(T, R, indexing="ij")
    mask = (RR > phi[:, None]) & (TT + RR < math.pi - 1e-9)
    # Minkowski preimages
    a = np.tan(0.5 * (TT + RR), where=mask, out=np.zeros_like(TT))
    b = np.tan(0.5 * (TT - RR), where=mask, out=np.zeros_like(TT))
    t_pre = 0.5 * (a + b)
    r_pre = 0.5 * (a - b)
    mask &= (t_pre <= traj.times[-1]) & (t_pre >= traj.times[0])
    mask &= (r_pre >= traj.r[0]) & (r_pre <= traj.r[-1])

    vals = np.zeros_like(TT)
    d_T = np.zeros_like(TT)
    d_R = np.zeros_like(TT)
    if mask.any():
        ts = t_pre[mask]
        rs = r_pre[mask]
        u, u_t, u_r = sample(traj, ts, rs)
        om = 2.0 / np.sqrt((1.0 + (ts + rs) ** 2) * (1.0 + (ts - rs) ** 2))
        p = 1.0 / (1.0 + (ts + rs) ** 2)
        q = 1.0 / (1.0 + (ts - rs) ** 2)
        dTdt = p + q
        dRdt = p - q
        det = dTdt ** 2 - dRdt ** 2  # jac is [[p+q, p-q], [p-q, p+q]]
        u_T = (dTdt * u_t - dRdt * u_r) / det
        u_R = (dTdt * u_r - dRdt * u_t) / det
        Tm, Rm = TT[mask], RR[mask]
        om_T = -np.sin(Tm)
        om_R = -np.sin(Rm)
        vals[mask] = u / om
        d_T[mask] = u_T / om - u * om_T / om ** 2
        d_R[mask] = u_R / om - u * om_R / om ** 2

    # row-level coverage: every requested row must carry at least a few nodes
    for i in range(len(T)):
        if not mask[i].any():
            raise CoverageError(f"row T = {T[i]:.4f} has no covered nodes")

    forcing = None
    if traj.config.forcing_fn is not None:
        forcing = np.zeros_like(TT)
        om_full = np.cos(TT) + np.cos(RR)
        forcing[mask] = (
            traj.config.forcing_fn(t_pre[mask], r_pre[mask]) / om_full[mask] ** 3
        )

    vals[~mask] = np.nan
    return cylinder.CylinderField(
        T=T, R=R, values=vals, mask=mask, d_T=d_T, d_R=d_R, forcing=forcing
    )


def monitors(traj: Trajectory):
    """Energy report plus the raw monitor series."""
    m = traj.monitors
    report = EnergyReport(
        t=m.t, E_total=m.E_total, E_local=m.E_local, local_radius=m.local_radius
    )
    return report, m


def write_outputs(traj: Trajectory, outdir, snapshot_every: float = 5.0) -> list[str]:
    """Write snapshot CSVs (r, u, u_t), a monitors CSV, and a metadata file.

    Snapshots are written for stored frames at intervals of ``snapshot_every``
    time units (plus the final frame).  Returns the list of written paths.
    """
    import configparser
    import os

    os.makedirs(outdir, exist_ok=True)
    paths = []
    next_t = 0.0
    kept = []
    for i, t in enumerate(traj.times):
        if t >= next_t - 1e-9 or i == len(traj.times) - 1:
            kept.append(i)
            next_t = t + snapshot_every
    for i in kept:
        p = os.path.join(outdir, f"frame_t{traj.times[i]:012.6f}.csv")
        np.savetxt(
            p,
            np.column_stack([traj.r, traj.u_frames[i], traj.ut_frames[i]]),
            delimiter=",", header="r,u,u_t", comments="",
        )
        paths.append(p)
    m = traj.monitors
    band_keys = sorted(m.bands)
    mon_path = os.path.join(outdir, "monitors.csv")
    np.savetxt(
        mon_path,
        np.column_stack([m.t, m.E_total, m.E_local, m.sup_u]
                        + [m.bands[b] for b in band_keys]),
        delimiter=",",
        header=",".join(["t", "E_total", "E_local", "sup_u"]
                        + [f"band_{b:g}" for b in band_keys]),
        comments="",
    )
    paths.append(mon_path)
    meta = configparser.ConfigParser()
    cfg = traj.config
    meta["trajectory"] = {
        "r_b": repr(cfg.obs.r_b),
        "nonlinearity": cfg.nonlinearity.name,
        "epsilon": repr(cfg.epsilon),
        "dr": repr(cfg.dr),
        "cfl": repr(cfg.cfl),
        "t_max": repr(cfg.t_max),
        "r_max": repr(cfg.r_max),
        "local_radius": repr(m.local_radius),
        "band_offsets": ",".join(f"{b:g}" for b in band_keys),
        "completed": str(traj.completed),
    }
    meta_path = os.path.join(outdir, "trajectory.ini")
    with open(meta_path, "w") as fh:
        meta.write(fh)
    paths.append(meta_path)
    return paths


def load_trajectory(outdir) -> Trajectory:
    """Rebuild a (snapshot-resolution) Trajectory from write_outputs files."""
    import configparser
    import glob
    import os

    meta = configparser.ConfigParser()
    meta_path = os.path.join(outdir, "trajectory.ini")
    if not meta.read(meta_path):
        raise ConfigError(f"missing trajectory metadata: {meta_path}")
    sec = meta["trajectory"]
    bands = tuple(float(x) for x in sec["band_offsets"].split(","))
    config = SolverConfig(
        obs=geometry.ObstacleSpec(float(sec["r_b"])),
        nonlinearity=compat.BUILTIN_NONLINEARITIES[sec["nonlinearity"]],
        epsilon=float(sec["epsilon"]),
        dr=float(sec["dr"]),
        cfl=float(sec["cfl"]),
        t_max=float(sec["t_max"]),
        r_max=float(sec["r_max"]),
        local_radius=float(sec["local_radius"]),
        band_offsets=bands,
    )
    frame_paths = sorted(glob.glob(os.path.join(outdir, "frame_t*.csv")))
    if not frame_paths:
        raise ConfigError(f"no snapshot frames under {outdir}")
    times, us, uts = [], [], []
    r = None
    for p in frame_paths:
        data = np.loadtxt(p, delimiter=",", skiprows=1)
        times.append(float(os.path.basename(p)[7:-4]))
        if r is None:
            r = data[:, 0]
        us.append(data[:, 1])
        uts.append(data[:, 2])
    mon = np.loadtxt(os.path.join(outdir, "monitors.csv"), delimiter=",", skiprows=1)
    monitors_ = MonitorSeries(
        t=mon[:, 0], E_total=mon[:, 1], E_local=mon[:, 2], sup_u=mon[:, 3],
        bands={b: mon[:, 4 + i] for i, b in enumerate(bands)},
        local_radius=float(sec["local_radius"]),
    )
    return Trajectory(
        r=r, times=np.asarray(times), u_frames=np.asarray(us),
        ut_frames=np.asarray(uts), monitors=monitors_, config=config,
        completed=sec.getboolean("completed"),
    )


def reference_samples(
    f: compat.RadialProfile,
    g: compat.RadialProfile,
    F: compat.NonlinearitySpec,
    dt: float,
    n_samples: int,
    cfl: float = 0.25,
) -> list[np.ndarray]:
    """Fine-step leapfrog samples u(j dt, .), j = 0..n_samples-1, on the profile grid.

    Used as the independent reference for the jet recursion; Dirichlet at both
    grid ends, so the data must be supported away from them for the sampled
    window.  Space is discretized at fourth order (falling back to second
    order on the two nodes adjacent to each end) so that high time
    derivatives of the samples are not polluted by the scheme's own
    truncation error.
    """
    dr = f.dr
    m = max(1, int(math.ceil(dt / (cfl * dr))))
    dt_int = dt / m
    r = f.r
    jet = compat.compute_jet(f, g, F, K=2)
    w_prev = r * f.values
    w_curr = r * (jet.psi[0].values + dt_int * jet.psi[1].values
                  + 0.5 * dt_int ** 2 * jet.psi[2].values)
    w_prev[0] = w_prev[-1] = 0.0
    w_curr[0] = w_curr[-1] = 0.0
    inv_r = 1.0 / r
    out = [f.values.copy()]
    level = 1  # w_curr currently holds time level * dt_int
    if level % m == 0:
        out.append(w_curr * inv_r)
    total = (n_samples - 1) * m
    while level < total:
        w_rr = np.zeros_like(w_curr)
        w_rr[2:-2] = (
            -w_curr[:-4] + 16 * w_curr[1:-3] - 30 * w_curr[2:-2]
            + 16 * w_curr[3:-1] - w_curr[4:]
        ) / (12 * dr ** 2)
        w_rr[1] = (w_curr[2] - 2 * w_curr[1] + w_curr[0]) / dr ** 2
        w_rr[-2] = (w_curr[-1] - 2 * w_curr[-2] + w_curr[-3]) / dr ** 2
        base = 2 * w_curr - w_prev + dt_int ** 2 * w_rr
        if F.is_trivial:
            w_next = base.copy()
        else:
            u = w_curr * inv_r
            u_r = compat.deriv4(w_curr, dr, 1) * inv_r - w_curr * inv_r ** 2
            u_t = (w_curr - w_prev) / dt_int * inv_r
            w_next = base
            for _ in range(2):
                w_next = base + dt_int ** 2 * r * F(u, u_t, u_r, r)
                w_next[0] = w_next[-1] = 0.0
                u_t = (w_next - w_prev) / (2 * dt_int) * inv_r
        w_next[0] = w_next[-1] = 0.0
        w_prev, w_curr = w_curr, w_next
        level += 1
        if level % m == 0:
            out.append(w_curr * inv_r)
    return out
