"""Event-driven piecewise integration of the alignment dynamics.

The flow is smooth between close encounters, so each solve alternates two
phases.  A main phase advances the system with an adaptive embedded
Runge-Kutta stepper (max step capped at the sample spacing) while watching
the minimum distance between particles of distinct clusters; the first
time it dips below the sticking distance ``d_stick`` the crossing is
localized by bisection on the dense output and a probe phase takes over.

The probe integrates through the encounter at full resolution, recording a
monitor row per step for the proximal group: its diameter (largest
pairwise distance) and velocity spread (largest pairwise speed).  It ends
in one of four dispositions:

* ``stick``   -- the group diameter and spread fell below the sticking
  thresholds and the collapse either went deep (diameter below
  ``d_stick/256``) or visibly stalled.  The event time is refined by a
  least-squares fit of the power-law collapse ``t = t0 - C * diam**alpha``
  over the monitor rows above the cap region of the working kernel, where
  the regularized and singular weights coincide and the collapse follows
  the singular profile.
* ``rebound`` -- every watched pair climbed back above ``d_stick``.  The
  closest-approach time is refined by golden-section search on the dense
  output; the event is a sticking if the spread there is below
  ``v_stick`` and a non-stick collision otherwise.
* ``horizon`` / ``budget`` -- the encounter reached the end of the time
  span, or exhausted the probe step budget, and is reported unresolved.

Sticking events merge the group to its mean state and integration
continues; non-stick collisions continue from the post-encounter state
without merging; a single surviving cluster drifts linearly to the end.

The working kernel is always the regularized weight with the configured
cap index, with the exponent taken from the system's kernel.  All
stepping is deterministic, so identical configurations reproduce
trajectories bitwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import RK45

from .dynamics import (
    ClusterPartition,
    ParticleSystem,
    acceleration_arrays,
    merge_clusters,
)
from .errors import ContinuationError, DivergenceError, DomainError, LocalizationError
from .kernels import CuckerSmaleKernel, RegularizedKernel, SingularKernel

__all__ = [
    "STICKING",
    "NON_STICK",
    "UNRESOLVED",
    "SolverConfig",
    "CollisionEvent",
    "Encounter",
    "SegmentResult",
    "Segment",
    "PiecewiseTrajectory",
    "integrate_segment",
    "classify_event",
    "solve_piecewise",
]

STICKING = "Sticking"
NON_STICK = "NonStickCollision"
UNRESOLVED = "Unresolved"

# event-machinery constants
_NSUB = 8                  # dense-output subsamples per step for the distance watch
_BISECT_TOL_FACTOR = 1e-12  # event localization tolerance, relative to the span
_PHI_DEEP_FACTOR = 256.0    # deep-collapse threshold is d_stick / this
_STALL_LOOKBACK = 4         # monitor rows used by the stall detector
_STALL_RATE_FACTOR = 100.0  # stall when |d diam/dt| < v_stick / this
_FIT_MIN_POINTS = 8
_FIT_RESIDUAL_FRAC = 0.02
_MAX_PROBE_STEPS = 50_000


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances, thresholds, and budget of a piecewise solve."""

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    d_stick: float = 1e-6
    v_stick: float = 1e-4
    n_reg: int = 10**6
    max_segments: int = 1000
    t_end: float = 5.0
    sample_dt: float = 1e-2

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "d_stick", "v_stick", "t_end", "sample_dt"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0.0):
                raise DomainError(f"{name} must be positive and finite, got {val!r}")
        if int(self.n_reg) != self.n_reg or self.n_reg < 2:
            raise DomainError(f"n_reg must be an integer >= 2, got {self.n_reg!r}")
        if int(self.max_segments) != self.max_segments or self.max_segments < 1:
            raise DomainError(f"max_segments must be an integer >= 1, got {self.max_segments!r}")
        object.__setattr__(self, "n_reg", int(self.n_reg))
        object.__setattr__(self, "max_segments", int(self.max_segments))


@dataclass(frozen=True)
class CollisionEvent:
    """A resolved close encounter.

    ``rel_speed`` is the largest pairwise speed within the group at the
    event; ``min_dist`` the smallest group separation seen there.
    """

    t_event: float
    group: tuple[int, ...]
    kind: str
    rel_speed: float
    min_dist: float


@dataclass
class Encounter:
    """Raw probe record handed to :func:`classify_event`."""

    t_cross: float
    group: tuple[int, ...]
    disposition: str
    t_min: float
    min_dist: float
    spread_at_min: float
    t_probe_end: float
    end_spread: float
    end_min_dist: float
    monitor_t: np.ndarray
    monitor_diam: np.ndarray
    monitor_spread: np.ndarray
    alpha: Optional[float]
    fit_floor: float
    n_particles: int
    t_threshold: Optional[float] = None
    diam_threshold: Optional[float] = None
    spread_threshold: Optional[float] = None


@dataclass
class SegmentResult:
    """Outcome of one integration segment."""

    t_terminal: float
    state: ParticleSystem
    encounter: Optional[Encounter]
    t: Optional[np.ndarray] = None
    x: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    grid_mask: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Segment:
    """Half-open sample slice ``(t_start, t_end]`` between events."""

    t_start: float
    t_end: float
    lo: int
    hi: int


@dataclass
class PiecewiseTrajectory:
    """Sampled solution, its events, and the final state."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    grid_mask: np.ndarray
    events: list[CollisionEvent]
    segments: list[Segment]
    final_state: ParticleSystem
    config: SolverConfig

    @property
    def n_sticking(self) -> int:
        return sum(1 for e in self.events if e.kind == STICKING)

    def grid(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Samples on the uniform ``sample_dt`` grid only."""
        m = self.grid_mask
        return self.t[m], self.x[m], self.v[m]


def _working_kernel(kernel, config: SolverConfig):
    """The kernel actually integrated, and its exponent if it has one."""
    if isinstance(kernel, (SingularKernel, RegularizedKernel)):
        reg = RegularizedKernel(alpha=kernel.alpha, n=config.n_reg)
        return reg, kernel.alpha
    if isinstance(kernel, CuckerSmaleKernel):
        return kernel, None
    raise DomainError(f"not a weight kernel: {kernel!r}")


class _Driver:
    """Packed right-hand side and pair bookkeeping for a fixed partition."""

    def __init__(self, system: ParticleSystem, config: SolverConfig):
        self.kernel, self.alpha = _working_kernel(system.kernel, config)
        self.n, self.d = system.x.shape
        self.nd = self.n * self.d
        self.labels = system.partition.labels()
        iu, ju = np.triu_indices(self.n, k=1)
        inter = self.labels[iu] != self.labels[ju]
        self.pi = iu[inter]
        self.pj = ju[inter]
        if isinstance(self.kernel, RegularizedKernel):
            self.fit_floor = max(4.0 * self.kernel.bridge_end, 1e-12)
        else:
            self.fit_floor = 1e-12

    @property
    def n_pairs(self) -> int:
        return len(self.pi)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        x = y[: self.nd].reshape(self.n, self.d)
        v = y[self.nd :].reshape(self.n, self.d)
        a = acceleration_arrays(x, v, self.labels, self.kernel)
        return np.concatenate([v.ravel(), a.ravel()])

    def unpack(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return (
            y[: self.nd].reshape(self.n, self.d).copy(),
            y[self.nd :].reshape(self.n, self.d).copy(),
        )

    def pair_dists(self, y: np.ndarray) -> np.ndarray:
        x = y[: self.nd].reshape(self.n, self.d)
        diff = x[self.pj] - x[self.pi]
        return np.sqrt(np.einsum("pd,pd->p", diff, diff))

    def pair_rel_speeds(self, y: np.ndarray) -> np.ndarray:
        v = y[self.nd :].reshape(self.n, self.d)
        diff = v[self.pj] - v[self.pi]
        return np.sqrt(np.einsum("pd,pd->p", diff, diff))

    def min_dist(self, y: np.ndarray) -> float:
        if self.n_pairs == 0:
            return math.inf
        return float(self.pair_dists(y).min())

    def component(self, y: np.ndarray, seed_i: int, seed_j: int, threshold: float) -> tuple[int, ...]:
        """Particles reachable from the seed pair through gaps <= threshold."""
        x = y[: self.nd].reshape(self.n, self.d)
        diff = x[None, :, :] - x[:, None, :]
        dist = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
        adj = dist <= threshold
        seen = {int(seed_i), int(seed_j)}
        frontier = list(seen)
        while frontier:
            i = frontier.pop()
            for k in np.nonzero(adj[i])[0]:
                k = int(k)
                if k not in seen:
                    seen.add(k)
                    frontier.append(k)
        return tuple(sorted(seen))

    def group_stats(self, y: np.ndarray, group) -> tuple[float, float]:
        """(diameter, velocity spread) over a particle group."""
        idx = np.asarray(group, dtype=np.intp)
        x = y[: self.nd].reshape(self.n, self.d)[idx]
        v = y[self.nd :].reshape(self.n, self.d)[idx]
        dx = x[None, :, :] - x[:, None, :]
        dv = v[None, :, :] - v[:, None, :]
        diam = math.sqrt(float(np.einsum("ijd,ijd->ij", dx, dx).max()))
        spread = math.sqrt(float(np.einsum("ijd,ijd->ij", dv, dv).max()))
        return diam, spread


def _pack(system: ParticleSystem) -> np.ndarray:
    return np.concatenate([system.x.ravel(), system.v.ravel()])


class _SampleStore:
    """Strictly increasing sample rows with a uniform-grid flag."""

    def __init__(self, n: int, d: int, sample_dt: float):
        self.n = n
        self.d = d
        self.sample_dt = sample_dt
        self.ts: list[float] = []
        self.xs: list[np.ndarray] = []
        self.vs: list[np.ndarray] = []
        self.grid: list[bool] = []

    def emit(self, t: float, x: np.ndarray, v: np.ndarray, is_grid: bool) -> None:
        if self.ts:
            if t == self.ts[-1]:
                return
            if t < self.ts[-1]:
                raise AssertionError(f"samples out of order: {t} after {self.ts[-1]}")
        self.ts.append(float(t))
        self.xs.append(np.array(x, dtype=float))
        self.vs.append(np.array(v, dtype=float))
        self.grid.append(bool(is_grid))

    def emit_y(self, t: float, y: np.ndarray, is_grid: bool) -> None:
        nd = self.n * self.d
        self.emit(t, y[:nd].reshape(self.n, self.d), y[nd:].reshape(self.n, self.d), is_grid)

    def emit_grid_range(self, evaluate, t_lo: float, t_hi: float) -> None:
        """Emit rows at grid times in ``(t_lo, t_hi]``, from ``evaluate(t) -> y``."""
        dt = self.sample_dt
        k = int(math.floor(t_lo / dt))
        while k * dt <= t_lo:
            k += 1
        tg = k * dt
        while tg <= t_hi:
            self.emit_y(tg, evaluate(tg), True)
            k += 1
            tg = k * dt

    def arrays(self):
        t = np.array(self.ts, dtype=float)
        x = np.array(self.xs, dtype=float).reshape(len(self.ts), self.n, self.d)
        v = np.array(self.vs, dtype=float).reshape(len(self.ts), self.n, self.d)
        return t, x, v, np.array(self.grid, dtype=bool)


def _is_grid_time(t: float, dt: float) -> bool:
    return round(t / dt) * dt == t


def _check_finite(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise DivergenceError(f"non-finite state at t={t}")


def _bisect_crossing(g, t_lo: float, t_hi: float, tol: float) -> float:
    """First root of the sign change g(t_lo) > 0 >= g(t_hi), by bisection."""
    lo, hi = t_lo, t_hi
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def _golden_min(f, t_lo: float, t_hi: float, tol: float) -> float:
    """Argmin of a scalar function by golden-section search."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = t_lo, t_hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _probe(
    driver: _Driver,
    t_cross: float,
    y_cross: np.ndarray,
    t_bound: float,
    span: float,
    config: SolverConfig,
    store: _SampleStore,
) -> tuple[Encounter, np.ndarray]:
    """Resolve the encounter that begins at the d_stick crossing."""
    d_stick = config.d_stick
    v_stick = config.v_stick
    phi_deep = d_stick / _PHI_DEEP_FACTOR

    dists0 = driver.pair_dists(y_cross)
    seed = int(np.argmin(dists0))
    group = driver.component(
        y_cross, int(driver.pi[seed]), int(driver.pj[seed]), d_stick * (1.0 + 1e-9)
    )
    watch = {seed}

    solver = RK45(
        driver.rhs,
        t_cross,
        y_cross,
        t_bound,
        max_step=config.sample_dt,
        rtol=config.rel_tol,
        atol=config.abs_tol,
    )

    diam0, spread0 = driver.group_stats(y_cross, group)
    mon_t = [t_cross]
    mon_diam = [diam0]
    mon_spread = [spread0]

    best_val = float(dists0[seed])
    best_t = t_cross
    best_dense = None
    best_lo = best_hi = t_cross

    disposition = "budget"
    t_threshold = None
    diam_threshold = None
    spread_threshold = None
    t_cur, y_cur = t_cross, y_cross

    for _ in range(_MAX_PROBE_STEPS):
        if solver.status != "running":
            disposition = "horizon"
            break
        msg = solver.step()
        if solver.status == "failed":
            raise LocalizationError(f"step size underflow during encounter probe: {msg}")
        _check_finite(solver.y, solver.t)
        dense = solver.dense_output()
        t_prev, t_now = solver.t_old, solver.t
        y_now = solver.y

        # track the closest approach at subsample resolution
        ts_sub = np.linspace(t_prev, t_now, _NSUB + 1)
        ys_sub = dense(ts_sub)
        for col in range(1, _NSUB + 1):
            val = driver.min_dist(ys_sub[:, col])
            if val < best_val:
                best_val = val
                best_t = float(ts_sub[col])
                best_dense = dense
                best_lo = float(ts_sub[max(col - 1, 0)])
                best_hi = float(ts_sub[min(col + 1, _NSUB)])

        store.emit_grid_range(dense, t_prev, t_now)
        store.emit_y(t_now, y_now, _is_grid_time(t_now, config.sample_dt))
        t_cur, y_cur = t_now, y_now

        dists = driver.pair_dists(y_now)
        near = dists <= d_stick
        if near.any():
            # extend the watch list with encounter-adjacent pairs
            in_group = np.isin(driver.pi, group) | np.isin(driver.pj, group)
            for p in np.nonzero(near & in_group)[0]:
                watch.add(int(p))
        if watch and not any(dists[p] <= d_stick for p in watch):
            disposition = "rebound"
            break

        seed_now = int(np.argmin(dists))
        group = driver.component(
            y_now, int(driver.pi[seed_now]), int(driver.pj[seed_now]), d_stick
        )
        diam, spread = driver.group_stats(y_now, group)
        mon_t.append(t_now)
        mon_diam.append(diam)
        mon_spread.append(spread)

        if diam < d_stick and spread < v_stick:
            stalled = False
            if len(mon_t) > _STALL_LOOKBACK:
                dt_lb = mon_t[-1] - mon_t[-1 - _STALL_LOOKBACK]
                if dt_lb > 0.0:
                    rate = abs(mon_diam[-1] - mon_diam[-1 - _STALL_LOOKBACK]) / dt_lb
                    stalled = rate < v_stick / _STALL_RATE_FACTOR
            if diam < phi_deep or stalled:
                disposition = "stick"
                t_threshold = t_now
                diam_threshold = diam
                spread_threshold = spread
                break

    # refine the closest approach inside its bracketing subinterval
    t_min, min_dist = best_t, best_val
    spread_at_min = mon_spread[-1]
    if best_dense is not None:
        tol = max(_BISECT_TOL_FACTOR * span, 1e-15)
        t_min = _golden_min(lambda s: driver.min_dist(best_dense(s)), best_lo, best_hi, tol)
        y_min = best_dense(t_min)
        min_dist = driver.min_dist(y_min)
        dmin = driver.pair_dists(y_min)
        seed_min = int(np.argmin(dmin))
        group_min = driver.component(
            y_min, int(driver.pi[seed_min]), int(driver.pj[seed_min]), d_stick
        )
        _, spread_at_min = driver.group_stats(y_min, group_min)
        if disposition == "rebound":
            group = group_min

    end_dists = driver.pair_dists(y_cur)
    enc = Encounter(
        t_cross=t_cross,
        group=tuple(group),
        disposition=disposition,
        t_min=float(t_min),
        min_dist=float(min_dist),
        spread_at_min=float(spread_at_min),
        t_probe_end=float(t_cur),
        end_spread=float(mon_spread[-1]),
        end_min_dist=float(end_dists.min()) if len(end_dists) else math.inf,
        monitor_t=np.array(mon_t),
        monitor_diam=np.array(mon_diam),
        monitor_spread=np.array(mon_spread),
        alpha=driver.alpha,
        fit_floor=driver.fit_floor,
        n_particles=driver.n,
        t_threshold=t_threshold,
        diam_threshold=diam_threshold,
        spread_threshold=spread_threshold,
    )
    return enc, np.array(y_cur, dtype=float)


def _run_segment(
    system: ParticleSystem,
    t0: float,
    t1: float,
    config: SolverConfig,
    store: _SampleStore,
) -> tuple[float, ParticleSystem, Optional[Encounter]]:
    driver = _Driver(system, config)
    y0 = _pack(system)
    span = t1 - t0
    store.emit_y(t0, y0, _is_grid_time(t0, config.sample_dt))

    solver = RK45(
        driver.rhs,
        t0,
        y0,
        t1,
        max_step=config.sample_dt,
        rtol=config.rel_tol,
        atol=config.abs_tol,
    )

    # pairs already inside d_stick at the segment start stay disarmed until
    # they climb back out, so a fresh segment does not instantly retrigger
    disarmed = set(int(p) for p in np.nonzero(driver.pair_dists(y0) <= config.d_stick)[0])

    y_final = y0
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            raise LocalizationError(
                f"step size underflow below {_BISECT_TOL_FACTOR * span:.3e}"
                f" while advancing the segment: {msg}"
            )
        _check_finite(solver.y, solver.t)
        dense = solver.dense_output()
        t_prev, t_now = solver.t_old, solver.t

        ts_sub = np.linspace(t_prev, t_now, _NSUB + 1)
        ys_sub = dense(ts_sub)
        tol = max(_BISECT_TOL_FACTOR * span, 1e-15)
        t_lo = t_prev
        d_prev = driver.pair_dists(ys_sub[:, 0])
        s_prev = driver.pair_rel_speeds(ys_sub[:, 0])
        crossing_t = None
        for col in range(1, _NSUB + 1):
            d_col = driver.pair_dists(ys_sub[:, col])
            s_col = driver.pair_rel_speeds(ys_sub[:, col])
            if disarmed:
                disarmed = {p for p in disarmed if d_col[p] <= config.d_stick}
            armed_min = math.inf
            for p in range(driver.n_pairs):
                if p not in disarmed and d_col[p] < armed_min:
                    armed_min = d_col[p]
            if armed_min <= config.d_stick:

                def g(s, _dis=frozenset(disarmed)):
                    dv = driver.pair_dists(dense(s))
                    vals = [dv[p] for p in range(driver.n_pairs) if p not in _dis]
                    return min(vals) - config.d_stick

                crossing_t = _bisect_crossing(g, t_lo, float(ts_sub[col]), tol)
                break
            # a fast pair can dip below the threshold and climb back out
            # between columns; chase any pair whose endpoint gap minus the
            # travel it could manage in the subinterval reaches d_stick
            sub_h = float(ts_sub[col]) - t_lo
            reach = np.minimum(d_prev, d_col) - sub_h * np.maximum(s_prev, s_col)
            dipped_t = None
            for p in np.nonzero(reach <= config.d_stick)[0]:
                p = int(p)
                if p in disarmed or d_prev[p] <= config.d_stick:
                    continue
                t_m = _golden_min(
                    lambda s, _p=p: float(driver.pair_dists(dense(s))[_p]),
                    t_lo,
                    float(ts_sub[col]),
                    tol,
                )
                if float(driver.pair_dists(dense(t_m))[p]) <= config.d_stick:
                    t_c = _bisect_crossing(
                        lambda s, _p=p: float(driver.pair_dists(dense(s))[_p])
                        - config.d_stick,
                        t_lo,
                        t_m,
                        tol,
                    )
                    if dipped_t is None or t_c < dipped_t:
                        dipped_t = t_c
            if dipped_t is not None:
                crossing_t = dipped_t
                break
            t_lo = float(ts_sub[col])
            d_prev, s_prev = d_col, s_col

        if crossing_t is not None:
            y_cross = dense(crossing_t)
            store.emit_grid_range(dense, t_prev, crossing_t)
            store.emit_y(crossing_t, y_cross, _is_grid_time(crossing_t, config.sample_dt))
            enc, y_end = _probe(driver, crossing_t, y_cross, t1, span, config, store)
            x_end, v_end = driver.unpack(y_end)
            state = ParticleSystem(x_end, v_end, system.kernel, system.partition.copy())
            return enc.t_probe_end, state, enc

        store.emit_grid_range(dense, t_prev, t_now)
        y_final = solver.y

    store.emit_y(t1, y_final, _is_grid_time(t1, config.sample_dt))
    x_end, v_end = driver.unpack(y_final)
    state = ParticleSystem(x_end, v_end, system.kernel, system.partition.copy())
    return t1, state, None


def _emit_drift(store: _SampleStore, system: ParticleSystem, t0: float, t1: float) -> None:
    """Exact linear motion of a fully merged (or force-free) system."""

    def evaluate(t):
        x = system.x + (t - t0) * system.v
        return np.concatenate([x.ravel(), system.v.ravel()])

    store.emit_y(t0, evaluate(t0), _is_grid_time(t0, store.sample_dt))
    store.emit_grid_range(evaluate, t0, t1)
    store.emit_y(t1, evaluate(t1), _is_grid_time(t1, store.sample_dt))


def _drift_state(system: ParticleSystem, dt: float) -> ParticleSystem:
    out = system.copy()
    out.x = out.x + dt * out.v
    return out


def integrate_segment(
    system: ParticleSystem, t0: float, t1: float, config: SolverConfig
) -> SegmentResult:
    """Advance one smooth segment, stopping at the first close encounter.

    Returns the dense samples, the terminal state, and the raw encounter
    record when the inter-cluster minimum distance dipped below
    ``d_stick`` (the probe has then already resolved the encounter's
    samples; hand the record to :func:`classify_event`).
    """
    if not (np.isfinite(t0) and np.isfinite(t1) and t1 > t0):
        raise DomainError(f"need t1 > t0, got [{t0!r}, {t1!r}]")
    n, d = system.x.shape
    store = _SampleStore(n, d, config.sample_dt)
    if system.partition.n_clusters == 1:
        _emit_drift(store, system, t0, t1)
        t_term, state, enc = t1, _drift_state(system, t1 - t0), None
    else:
        t_term, state, enc = _run_segment(system.copy(), t0, t1, config, store)
    t, x, v, grid_mask = store.arrays()
    return SegmentResult(
        t_terminal=t_term, state=state, encounter=enc, t=t, x=x, v=v, grid_mask=grid_mask
    )


def _stick_time_fit(enc: Encounter, config: SolverConfig) -> Optional[float]:
    """Collapse-time estimate from the approach monitor rows.

    Fits ``t = t0 - C * diam**alpha`` over the strictly decreasing monitor
    rows between the working-kernel cap region and ``d_stick``; the
    intercept estimates the instant of collapse.  Returns None when the
    window is too thin or the power law does not hold.
    """
    if enc.alpha is None:
        return None
    ts, diams = [], []
    last = math.inf
    for t, diam in zip(enc.monitor_t, enc.monitor_diam):
        if enc.fit_floor <= diam <= config.d_stick and diam < last:
            ts.append(t)
            diams.append(diam)
            last = diam
    if len(ts) < _FIT_MIN_POINTS:
        return None
    ts = np.array(ts)
    diams = np.array(diams)
    u = diams**enc.alpha
    design = np.column_stack([np.ones_like(u), u])
    coef, *_ = np.linalg.lstsq(design, ts, rcond=None)
    t0_hat = float(coef[0])
    c_hat = -float(coef[1])
    if c_hat <= 0.0:
        return None
    resid = design @ coef - ts
    rms = float(np.sqrt(np.mean(resid * resid)))
    span = float(ts[-1] - ts[0])
    if rms > max(_FIT_RESIDUAL_FRAC * span, 1e-12):
        return None
    remaining_cap = (
        (1.0 - enc.alpha)
        * float(diams[-1]) ** enc.alpha
        / (2.0 * enc.alpha)
        * 2.0
        * enc.n_particles
    )
    if t0_hat < ts[-1] - 1e-9 * max(1.0, abs(ts[-1])) or t0_hat > ts[-1] + remaining_cap:
        return None
    return t0_hat


def classify_event(encounter: Encounter, config: SolverConfig) -> CollisionEvent:
    """Turn a probe record into a typed event.

    A collapse certified by the thresholds is a sticking; its time is the
    later of the threshold instant and the power-law fit.  A rebound is a
    sticking when the spread at closest approach is below ``v_stick`` and
    a non-stick collision otherwise (the distance minimum is transversal).
    Anything else is unresolved at the probe's last time.
    """
    enc = encounter
    if enc.disposition == "stick":
        t_event = enc.t_threshold
        t_fit = _stick_time_fit(enc, config)
        if t_fit is not None:
            t_event = max(t_event, t_fit)
        return CollisionEvent(
            t_event=float(t_event),
            group=enc.group,
            kind=STICKING,
            rel_speed=float(enc.spread_threshold),
            min_dist=float(enc.diam_threshold),
        )
    if enc.disposition == "rebound":
        kind = STICKING if enc.spread_at_min < config.v_stick else NON_STICK
        return CollisionEvent(
            t_event=enc.t_min,
            group=enc.group,
            kind=kind,
            rel_speed=enc.spread_at_min,
            min_dist=enc.min_dist,
        )
    return CollisionEvent(
        t_event=enc.t_probe_end,
        group=enc.group,
        kind=UNRESOLVED,
        rel_speed=enc.end_spread,
        min_dist=enc.end_min_dist,
    )


def solve_piecewise(system: ParticleSystem, config: SolverConfig) -> PiecewiseTrajectory:
    """Integrate to ``config.t_end`` through all close encounters.

    Sticking events merge their group and strictly reduce the cluster
    count, so a run carries at most ``N - 1`` of them; cluster membership
    only ever grows.  Once one cluster remains the tail is exact linear
    drift.  Raises :class:`ContinuationError` when the segment budget is
    exhausted before the horizon.
    """
    sys_cur = system.copy()
    n, d = sys_cur.x.shape
    store = _SampleStore(n, d, config.sample_dt)
    events: list[CollisionEvent] = []
    t = 0.0
    t_end = config.t_end
    eps_t = 1e-12 * max(1.0, t_end)
    segments_used = 0

    while t < t_end - eps_t:
        if sys_cur.partition.n_clusters == 1:
            _emit_drift(store, sys_cur, t, t_end)
            sys_cur = _drift_state(sys_cur, t_end - t)
            t = t_end
            break
        if segments_used >= config.max_segments:
            raise ContinuationError(
                f"exceeded max_segments={config.max_segments} before reaching t_end"
            )
        segments_used += 1
        t_term, state, enc = _run_segment(sys_cur, t, t_end, config, store)
        sys_cur = state
        if enc is None:
            t = t_term
            continue
        event = classify_event(enc, config)
        t_floor = events[-1].t_event + eps_t if events else 0.0
        t_clamped = min(max(event.t_event, t_floor), t_end)
        if t_clamped != event.t_event:
            event = replace(event, t_event=t_clamped)
        events.append(event)
        if event.kind == STICKING:
            sys_cur = merge_clusters(sys_cur, event.group)
        t = t_term

    ts, xs, vs, grid_mask = store.arrays()
    boundaries = [0.0] + [e.t_event for e in events] + [t_end]
    segments = []
    lo = 0
    for k in range(len(boundaries) - 1):
        hi = int(np.searchsorted(ts, boundaries[k + 1], side="right"))
        segments.append(Segment(t_start=boundaries[k], t_end=boundaries[k + 1], lo=lo, hi=hi))
        lo = hi
    return PiecewiseTrajectory(
        t=ts,
        x=xs,
        v=vs,
        grid_mask=grid_mask,
        events=events,
        segments=segments,
        final_state=sys_cur,
        config=config,
    )
