"""Reproducible Brownian paths and positivity-preserving integration.

Applying Ito's formula to the system turns the positivity constraint into a
coordinate choice: the exact log-coordinate dynamics

    d ln S = [a1/S - c1 - I f/S - (I g/S)^2 / 2] dt + sigma1 dB1 - (I g/S) dB3
    d ln I = [-c2 + f - g^2/2] dt + sigma2 dB2 + g dB3
    d ln phi = [a1/phi - c1] dt + sigma1 dB1

are discretized by explicit Euler-Maruyama, so every stored S, I, phi is an
exponential and strictly positive by construction.  ln I is clamped at
FLOOR_LOG (numerical extinction); integration continues past the floor.

Brownian increments come from counter-based Philox streams keyed by
(master_seed, trajectory_index, stream), so any trajectory is reproducible
bit-for-bit in isolation and trajectories are embarrassingly parallel.  The
only state coupling is the stiffness guard: when a1*dt/S (or a1*dt/phi)
exceeds 0.5 the step is subdivided dyadically, at most 2^6 substeps, with the
increments refined by Brownian bridging from a dedicated per-trajectory
stream, so the driving path's law is preserved.

Catalog incidence models run in a numba-compiled kernel; custom callables run
the identical algorithm in plain Python.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit
from numpy.random import Generator, Philox

from .model import (
    IncidenceModel,
    ModelParams,
    ParameterError,
    State,
    derive_constants,
)

# ln I clamp: exp(-690) ~ 5.6e-300, far below any population scale but still
# a normal double, keeping Lyapunov slopes measurable without NaN.
FLOOR_LOG = -690.0

# Dyadic stiffness-guard limit: at most 2^6 substeps per step.
MAX_GUARD_DEPTH = 6

_MAX_TRAJECTORY_INDEX = 1 << 60

# Per-trajectory stream slots within the Philox key space.
_STREAM_REFINE = 0
_STREAM_DB1 = 1
_STREAM_DB2 = 2
_STREAM_DB3 = 3

_MODE_FULL = 0
_MODE_COUPLED = 1
_MODE_BOUNDARY = 2


class StepError(RuntimeError):
    """Non-finite state produced by an integration step."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


def _philox_stream(master_seed: int, trajectory_index: int, stream: int) -> Generator:
    if not 0 <= trajectory_index < _MAX_TRAJECTORY_INDEX:
        raise ParameterError(
            f"trajectory_index must be in [0, 2^60), got {trajectory_index}"
        )
    key = np.array(
        [master_seed & (2 ** 64 - 1), (trajectory_index << 3) | stream],
        dtype=np.uint64,
    )
    return Generator(Philox(key=key))


def stream_increments(master_seed: int, trajectory_index: int, stream: int,
                      dt: float, n_steps: int) -> np.ndarray:
    """Normal(0, dt) increments of one Brownian stream, bit-reproducible."""
    gen = _philox_stream(master_seed, trajectory_index, stream)
    return gen.standard_normal(n_steps) * math.sqrt(dt)


@dataclass(frozen=True)
class BrownianBundle:
    """The three driving increment streams of one trajectory.

    Streams are mutually independent (disjoint Philox key domains of one
    master seed) and regenerate bit-identically from the provenance fields.
    """

    dt: float
    n_steps: int
    db1: np.ndarray
    db2: np.ndarray
    db3: np.ndarray
    master_seed: int
    trajectory_index: int


def make_bundle(master_seed: int, trajectory_index: int, dt: float,
                n_steps: int) -> BrownianBundle:
    if not (math.isfinite(dt) and dt > 0.0):
        raise ParameterError(f"dt must be positive, got {dt!r}")
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps}")
    return BrownianBundle(
        dt=dt,
        n_steps=n_steps,
        db1=stream_increments(master_seed, trajectory_index, _STREAM_DB1, dt, n_steps),
        db2=stream_increments(master_seed, trajectory_index, _STREAM_DB2, dt, n_steps),
        db3=stream_increments(master_seed, trajectory_index, _STREAM_DB3, dt, n_steps),
        master_seed=master_seed,
        trajectory_index=trajectory_index,
    )


@dataclass(frozen=True)
class TrajectoryPath:
    """Stored log-coordinate samples of one trajectory on a uniform grid.

    s, i, phi are exponentials of the stored logs, hence strictly positive.
    guard_steps counts steps where the stiffness guard subdivided.
    """

    times: np.ndarray
    log_s: np.ndarray
    log_i: np.ndarray
    log_phi: Optional[np.ndarray]
    master_seed: int
    trajectory_index: int
    dt: float
    store_stride: int
    guard_steps: int = 0

    @property
    def s(self) -> np.ndarray:
        return np.exp(self.log_s)

    @property
    def i(self) -> np.ndarray:
        return np.exp(self.log_i)

    @property
    def phi(self) -> Optional[np.ndarray]:
        return None if self.log_phi is None else np.exp(self.log_phi)

    def floored(self) -> np.ndarray:
        """Mask of stored points where ln I sits at the underflow floor."""
        return self.log_i <= FLOOR_LOG

    def to_csv(self, path) -> None:
        """Write t,S,I[,phi],lnS,lnI rows with provenance header comments."""
        buf = io.StringIO()
        buf.write(f"# seed={self.master_seed}\n")
        buf.write(f"# trajectory={self.trajectory_index}\n")
        buf.write(f"# dt={self.dt!r}\n")
        buf.write(f"# store_stride={self.store_stride}\n")
        has_phi = self.log_phi is not None
        buf.write("t,S,I,phi,lnS,lnI\n" if has_phi else "t,S,I,lnS,lnI\n")
        s, i = self.s, self.i
        phi = self.phi if has_phi else None
        for k in range(len(self.times)):
            cols = [self.times[k], s[k], i[k]]
            if has_phi:
                cols.append(phi[k])
            cols += [self.log_s[k], self.log_i[k]]
            buf.write(",".join(repr(float(v)) for v in cols) + "\n")
        with open(path, "w", newline="") as fh:
            fh.write(buf.getvalue())


@njit(cache=True, inline="always")
def _incidence_nb(code, coef, s, i):
    """(f, g) for catalog kinds; mirrors model.make_catalog_incidence."""
    if code == 0:  # bilinear
        return coef[0] * s, 0.0
    elif code == 1:  # holling2
        return coef[0] * s / (coef[1] + s), 0.0
    elif code == 2:  # beddington-deangelis
        return coef[0] * s / (1.0 + coef[1] * s + coef[2] * i), 0.0
    elif code == 3:  # nonlinear
        beta = coef[0]
        l = coef[1]
        m2 = coef[2]
        h = coef[3]
        if l == 1.0:
            num = beta * s
        elif i > 0.0:
            num = beta * s * i ** (l - 1.0)
        elif l > 1.0:
            num = 0.0
        else:
            num = np.inf if s > 0.0 else 0.0
        return num / (1.0 + m2 * i ** h), 0.0
    elif code == 4:  # ratio_example
        den = 1.0 + s + i
        return coef[0] * s / den, coef[1] * s / den
    return np.nan, np.nan


@njit(cache=True, inline="always")
def _em_substep_nb(mode, ln_s, ln_i, ln_phi, a1, c1, c2, sig1, sig2,
                   code, coef, d1, d2, d3, h, floor_log):
    if mode != 2:
        s = math.exp(ln_s)
        i = math.exp(ln_i)
        fv, gv = _incidence_nb(code, coef, s, i)
        q = i * gv / s
        ln_s = (ln_s + (a1 / s - c1 - i * fv / s - 0.5 * q * q) * h
                + sig1 * d1 - q * d3)
        ln_i = (ln_i + (-c2 + fv - 0.5 * gv * gv) * h
                + sig2 * d2 + gv * d3)
        if ln_s < floor_log:
            ln_s = floor_log
        if ln_i < floor_log:
            ln_i = floor_log
    if mode != 0:
        p = math.exp(ln_phi)
        ln_phi = ln_phi + (a1 / p - c1) * h + sig1 * d1
        if ln_phi < floor_log:
            ln_phi = floor_log
    return ln_s, ln_i, ln_phi


@njit(cache=True)
def _run_kernel(mode, ln_s0, ln_i0, ln_phi0, phi_from_zero,
                a1, c1, c2, sig1, sig2, code, coef,
                db1, db2, db3, dt, floor_log, max_depth,
                stride, out_s, out_i, out_phi, gen):
    """Integrate n steps; store every stride-th state (state 0 included).

    Returns (status, guard_steps): status is -1 on success, else the index of
    the step that produced a non-finite state.
    """
    n = db1.shape[0]
    ln_s = ln_s0
    ln_i = ln_i0
    ln_phi = ln_phi0
    if mode != 2:
        out_s[0] = ln_s
        out_i[0] = ln_i
    if mode != 0:
        out_phi[0] = ln_phi
    nbuf = 1 << max_depth
    b1 = np.empty(nbuf)
    b2 = np.empty(nbuf)
    b3 = np.empty(nbuf)
    guard = 0
    for k in range(n):
        if mode == 2 and phi_from_zero == 1 and k == 0:
            # phi(0)=0: log coordinates are undefined, but one natural-
            # coordinate Euler step is exact here (noise scales with phi).
            ln_phi = math.log(a1 * dt)
        else:
            ref = 1.8e308
            if mode != 2:
                s = math.exp(ln_s)
                if s < ref:
                    ref = s
            if mode != 0:
                p = math.exp(ln_phi)
                if 0.0 < p < ref:
                    ref = p
            depth = 0
            while depth < max_depth and a1 * dt > 0.5 * ref * (1 << depth):
                depth += 1
            if depth == 0:
                ln_s, ln_i, ln_phi = _em_substep_nb(
                    mode, ln_s, ln_i, ln_phi, a1, c1, c2, sig1, sig2,
                    code, coef, db1[k], db2[k], db3[k], dt, floor_log)
            else:
                guard += 1
                b1[0] = db1[k]
                b2[0] = db2[k]
                b3[0] = db3[k]
                m = 1
                hh = dt
                for _lev in range(depth):
                    half = 0.5 * math.sqrt(hh)
                    for j in range(m - 1, -1, -1):
                        d = b1[j]
                        first = 0.5 * d + half * gen.standard_normal()
                        b1[2 * j] = first
                        b1[2 * j + 1] = d - first
                        d = b2[j]
                        first = 0.5 * d + half * gen.standard_normal()
                        b2[2 * j] = first
                        b2[2 * j + 1] = d - first
                        d = b3[j]
                        first = 0.5 * d + half * gen.standard_normal()
                        b3[2 * j] = first
                        b3[2 * j + 1] = d - first
                    m *= 2
                    hh *= 0.5
                nsub = 1 << depth
                hsub = dt / nsub
                for j in range(nsub):
                    ln_s, ln_i, ln_phi = _em_substep_nb(
                        mode, ln_s, ln_i, ln_phi, a1, c1, c2, sig1, sig2,
                        code, coef, b1[j], b2[j], b3[j], hsub, floor_log)
        bad = False
        if mode != 2 and not (math.isfinite(ln_s) and math.isfinite(ln_i)):
            bad = True
        if mode != 0 and not math.isfinite(ln_phi):
            bad = True
        if bad:
            return k, guard
        if (k + 1) % stride == 0:
            idx = (k + 1) // stride
            if mode != 2:
                out_s[idx] = ln_s
                out_i[idx] = ln_i
            if mode != 0:
                out_phi[idx] = ln_phi
    return -1, guard


def _run_py(mode, ln_s0, ln_i0, ln_phi0, phi_from_zero,
            a1, c1, c2, sig1, sig2, f, g,
            db1, db2, db3, dt, floor_log, max_depth,
            stride, out_s, out_i, out_phi, gen):
    """Interpreted twin of _run_kernel for custom incidence callables."""

    def substep(ln_s, ln_i, ln_phi, d1, d2, d3, h):
        if mode != 2:
            s = math.exp(ln_s)
            i = math.exp(ln_i)
            fv = float(f(s, i))
            gv = float(g(s, i))
            q = i * gv / s
            ln_s = (ln_s + (a1 / s - c1 - i * fv / s - 0.5 * q * q) * h
                    + sig1 * d1 - q * d3)
            ln_i = (ln_i + (-c2 + fv - 0.5 * gv * gv) * h
                    + sig2 * d2 + gv * d3)
            if ln_s < floor_log:
                ln_s = floor_log
            if ln_i < floor_log:
                ln_i = floor_log
        if mode != 0:
            p = math.exp(ln_phi)
            ln_phi = ln_phi + (a1 / p - c1) * h + sig1 * d1
            if ln_phi < floor_log:
                ln_phi = floor_log
        return ln_s, ln_i, ln_phi

    n = db1.shape[0]
    ln_s, ln_i, ln_phi = ln_s0, ln_i0, ln_phi0
    if mode != 2:
        out_s[0] = ln_s
        out_i[0] = ln_i
    if mode != 0:
        out_phi[0] = ln_phi
    nbuf = 1 << max_depth
    b1 = np.empty(nbuf)
    b2 = np.empty(nbuf)
    b3 = np.empty(nbuf)
    guard = 0
    for k in range(n):
        if mode == 2 and phi_from_zero == 1 and k == 0:
            ln_phi = math.log(a1 * dt)
        else:
            ref = 1.8e308
            if mode != 2:
                s = math.exp(ln_s)
                if s < ref:
                    ref = s
            if mode != 0:
                p = math.exp(ln_phi)
                if 0.0 < p < ref:
                    ref = p
            depth = 0
            while depth < max_depth and a1 * dt > 0.5 * ref * (1 << depth):
                depth += 1
            if depth == 0:
                ln_s, ln_i, ln_phi = substep(
                    ln_s, ln_i, ln_phi, db1[k], db2[k], db3[k], dt)
            else:
                guard += 1
                b1[0] = db1[k]
                b2[0] = db2[k]
                b3[0] = db3[k]
                m = 1
                hh = dt
                for _lev in range(depth):
                    half = 0.5 * math.sqrt(hh)
                    for j in range(m - 1, -1, -1):
                        for buf in (b1, b2, b3):
                            d = buf[j]
                            first = 0.5 * d + half * gen.standard_normal()
                            buf[2 * j] = first
                            buf[2 * j + 1] = d - first
                    m *= 2
                    hh *= 0.5
                nsub = 1 << depth
                hsub = dt / nsub
                for j in range(nsub):
                    ln_s, ln_i, ln_phi = substep(
                        ln_s, ln_i, ln_phi, b1[j], b2[j], b3[j], hsub)
        bad = False
        if mode != 2 and not (math.isfinite(ln_s) and math.isfinite(ln_i)):
            bad = True
        if mode != 0 and not math.isfinite(ln_phi):
            bad = True
        if bad:
            return k, guard
        if (k + 1) % stride == 0:
            idx = (k + 1) // stride
            if mode != 2:
                out_s[idx] = ln_s
                out_i[idx] = ln_i
            if mode != 0:
                out_phi[idx] = ln_phi
    return -1, guard


def step_full(state_logs, params: ModelParams, model: IncidenceModel,
              db1: float, db2: float, db3: float, dt: float):
    """One explicit Euler-Maruyama step of (ln S, ln I).

    Outputs are clamped below at FLOOR_LOG, so positivity of (S, I) holds by
    construction.  Raises StepError on a non-finite drift or result.
    """
    ln_s, ln_i = float(state_logs[0]), float(state_logs[1])
    d = derive_constants(params)
    s = math.exp(ln_s)
    i = math.exp(ln_i)
    fv = float(model.f(s, i))
    gv = float(model.g(s, i))
    q = i * gv / s
    new_s = (ln_s + (params.a1 / s - d.c1 - i * fv / s - 0.5 * q * q) * dt
             + params.sigma1 * db1 - q * db3)
    new_i = (ln_i + (-d.c2 + fv - 0.5 * gv * gv) * dt
             + params.sigma2 * db2 + gv * db3)
    if new_s < FLOOR_LOG:
        new_s = FLOOR_LOG
    if new_i < FLOOR_LOG:
        new_i = FLOOR_LOG
    if not (math.isfinite(new_s) and math.isfinite(new_i)):
        raise StepError(
            f"non-finite state after step (f={fv!r}, g={gv!r})")
    return new_s, new_i


def _n_steps_for(horizon: float, dt: float) -> int:
    if not (math.isfinite(dt) and dt > 0.0):
        raise ParameterError(f"dt must be positive, got {dt!r}")
    n = int(round(horizon / dt))
    if n < 1 or horizon < dt:
        raise ParameterError(f"horizon must be at least dt, got {horizon!r}")
    return n


def _dispatch(mode, ln_s0, ln_i0, ln_phi0, phi_from_zero, params, model,
              bundle, store_stride):
    d = derive_constants(params)
    n = bundle.n_steps
    if store_stride < 1:
        raise ParameterError(f"store_stride must be >= 1, got {store_stride}")
    n_stored = n // store_stride + 1
    out_s = np.empty(n_stored if mode != _MODE_BOUNDARY else 1)
    out_i = np.empty(n_stored if mode != _MODE_BOUNDARY else 1)
    out_phi = np.empty(n_stored if mode != _MODE_FULL else 1)
    gen = _philox_stream(bundle.master_seed, bundle.trajectory_index,
                         _STREAM_REFINE)
    args = (mode, ln_s0, ln_i0, ln_phi0, phi_from_zero,
            params.a1, d.c1, d.c2, params.sigma1, params.sigma2)
    tail = (bundle.db1, bundle.db2, bundle.db3, bundle.dt, FLOOR_LOG,
            MAX_GUARD_DEPTH, store_stride, out_s, out_i, out_phi, gen)
    if model is None:
        # boundary-only runs never evaluate incidence; any kernel code works
        status, guard = _run_kernel(*args, 0, np.zeros(1), *tail)
    elif model.kernel_code >= 0:
        coef = np.asarray(model.coef, dtype=np.float64)
        status, guard = _run_kernel(*args, model.kernel_code, coef, *tail)
    else:
        status, guard = _run_py(*args, model.f, model.g, *tail)
    if status >= 0:
        raise StepError(f"non-finite state at step {status}", step=int(status))
    times = bundle.dt * store_stride * np.arange(n_stored)
    return times, out_s, out_i, out_phi, guard


def simulate_full(params: ModelParams, model: IncidenceModel, initial: State,
                  horizon: float, dt: float, master_seed: int,
                  trajectory_index: int = 0,
                  store_stride: int = 1) -> TrajectoryPath:
    """Integrate the full system from `initial` over [0, horizon]."""
    n = _n_steps_for(horizon, dt)
    bundle = make_bundle(master_seed, trajectory_index, dt, n)
    times, out_s, out_i, _, guard = _dispatch(
        _MODE_FULL, math.log(initial.s), math.log(initial.i), 0.0, 0,
        params, model, bundle, store_stride)
    return TrajectoryPath(
        times=times, log_s=out_s, log_i=out_i, log_phi=None,
        master_seed=master_seed, trajectory_index=trajectory_index,
        dt=dt, store_stride=store_stride, guard_steps=int(guard))


def simulate_coupled(params: ModelParams, model: IncidenceModel,
                     initial: State, horizon: float, dt: float,
                     master_seed: int, trajectory_index: int = 0,
                     store_stride: int = 1) -> TrajectoryPath:
    """Integrate the full system and the boundary equation on one shared dB1.

    phi(0) = initial.s, so |S - phi| starts at zero and measures how fast the
    susceptible class collapses onto the infection-free flow.
    """
    n = _n_steps_for(horizon, dt)
    bundle = make_bundle(master_seed, trajectory_index, dt, n)
    ln_s0 = math.log(initial.s)
    times, out_s, out_i, out_phi, guard = _dispatch(
        _MODE_COUPLED, ln_s0, math.log(initial.i), ln_s0, 0,
        params, model, bundle, store_stride)
    return TrajectoryPath(
        times=times, log_s=out_s, log_i=out_i, log_phi=out_phi,
        master_seed=master_seed, trajectory_index=trajectory_index,
        dt=dt, store_stride=store_stride, guard_steps=int(guard))


def simulate_boundary(params: ModelParams, u: float, bundle: BrownianBundle,
                      store_stride: int = 1) -> np.ndarray:
    """Integrate d phi = (a1 - b1 phi) dt + sigma1 phi dB1 on bundle.db1.

    u >= 0; u = 0 takes one natural-coordinate Euler step before switching to
    log coordinates.  Returns phi in natural coordinates on the stored grid.
    """
    if not (math.isfinite(u) and u >= 0.0):
        raise ParameterError(f"u must be nonnegative, got {u!r}")
    from_zero = 1 if u == 0.0 else 0
    ln_phi0 = -math.inf if from_zero else math.log(u)
    _, _, _, out_phi, _ = _dispatch(
        _MODE_BOUNDARY, 0.0, 0.0, ln_phi0, from_zero,
        params, None, bundle, store_stride)
    return np.exp(out_phi)
