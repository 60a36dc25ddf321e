"""
Sampled-data loop analysis: a continuous plant in negative feedback with a
discrete controller through an ideal sampler and a zero-order hold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AlgebraicLoopSingularity, DivergedSimulation, TimeBaseMismatch
from .lti import (
    SimulationTrace,
    System,
    evaluate,
    step_response,
    to_standard_form,
    zoh_discretize,
)
from .synthesis import hold_response

METHOD_NOTE = "ZOH-discretized closed-loop eigenvalue test"


@dataclass(frozen=True)
class HybridLoop:
    plant: System
    controller: System
    oversample: int = 20

    def __post_init__(self):
        if self.plant.dt is not None:
            raise ValueError("plant must be continuous-time")
        if self.controller.dt is None:
            raise ValueError("controller must be discrete-time")
        if self.oversample < 2:
            raise ValueError("oversample must be at least 2")

    @property
    def T(self) -> float:
        return self.controller.dt


@dataclass(frozen=True)
class StabilityVerdict:
    stable: bool
    spectral_radius: float
    method_note: str = METHOD_NOTE

    def as_dict(self):
        return {"stable": self.stable, "spectral_radius": self.spectral_radius,
                "method_note": self.method_note}


@dataclass(frozen=True)
class Metrics:
    linf: float
    overshoot_pct: float
    settling_time_2pct: float
    steady_state_error: float

    def as_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


def loop_gain_response(plant: System, controller: System, T: float, omega: float) -> complex:
    """``P(jw) R(jw) K(e^{jwT})`` for ``0 < w < pi/T``."""
    if not 0 < omega < np.pi / T:
        raise ValueError("frequency must lie in (0, pi/T)")
    return (evaluate(plant, 1j * omega) * hold_response(omega, T)
            * evaluate(controller, np.exp(1j * omega * T)))


def closed_loop_response(plant: System, controller: System, T: float, omega: float) -> complex:
    """Band-limited sampled-data closed loop ``F / (1 + F)``."""
    F = loop_gain_response(plant, controller, T, omega)
    if abs(1 + F) < 1e-12:
        raise AlgebraicLoopSingularity(f"1 + F vanishes at w = {omega}")
    return F / (1 + F)


def reference_mismatch(plant: System, controller: System, M: System, T: float, omega) -> np.ndarray:
    """``|M(jw) - F/(1+F)|`` on a frequency grid."""
    omega = np.atleast_1d(omega)
    return np.array([abs(evaluate(M, 1j * w) - closed_loop_response(plant, controller, T, w))
                     for w in omega])


def _loop_gain_factor(Dp, Dk):
    den = 1 + Dk * Dp
    if abs(den) < 1e-12:
        raise AlgebraicLoopSingularity("1 + D_K D_P = 0")
    return 1.0 / den


def closed_loop_matrix(plant: System, controller: System, T: float) -> np.ndarray:
    """State matrix of the ZOH-discretized plant in negative feedback with
    the controller, state ordering ``[x_plant, x_controller]``."""
    p = zoh_discretize(plant, T)
    k = to_standard_form(controller)
    Ap, Bp, Cp, Dp = p.A, p.B, p.C, p.D
    Ak, Bk, Ck, Dk = k.A, k.B, k.C, k.D
    g = _loop_gain_factor(Dp, Dk)
    # u = g (Ck xk - Dk Cp xp), y = Cp xp + Dp u, controller input eps = -y
    Uxp = -g * Dk * Cp
    Uxk = g * Ck
    Yxp = Cp + Dp * Uxp
    Yxk = Dp * Uxk
    top = np.hstack([Ap + Bp @ Uxp, Bp @ Uxk])
    bot = np.hstack([-Bk @ Yxp, Ak - Bk @ Yxk])
    return np.real_if_close(np.vstack([top, bot]))


def hybrid_stability_check(plant: System, controller: System, T: Optional[float] = None) -> StabilityVerdict:
    T = controller.dt if T is None else T
    Acl = closed_loop_matrix(plant, controller, T)
    rho = float(np.max(np.abs(np.linalg.eigvals(Acl)))) if Acl.size else 0.0
    return StabilityVerdict(rho < 1, rho)


def simulate_hybrid_step(loop: HybridLoop, duration: float,
                         reference: Optional[System] = None) -> SimulationTrace:
    """Unit-step response of the sampled-data loop on a grid of ``T/m``.

    At each sampling instant the error ``r - y`` is sampled, the controller
    output is computed and held for one period while the plant is advanced
    on the fine grid. When both plant and controller have direct
    feedthrough the instantaneous loop is solved exactly.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    T, m = loop.T, loop.oversample
    h = T / m
    p = zoh_discretize(loop.plant, h)
    k = to_standard_form(loop.controller)
    g = _loop_gain_factor(p.D, k.D)
    Ap, Bp, Cp, Dp = np.real(p.A), np.real(p.B[:, 0]), np.real(p.C[0]), float(np.real(p.D))
    Ak, Bk, Ck, Dk = np.real(k.A), np.real(k.B[:, 0]), np.real(k.C[0]), float(np.real(k.D))

    n = int(np.floor(duration / h + 1e-9)) + 1
    t = h * np.arange(n)
    r = np.ones(n)
    y = np.zeros(n)
    u = np.zeros(n)
    eps = np.full(n, np.nan)
    xp = np.zeros(Ap.shape[0])
    xk = np.zeros(Ak.shape[0])
    samples = np.arange(0, n, m)
    held = 0.0
    # overflow is caught by the divergence check below
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            if i % m == 0:
                # u = Ck xk + Dk (r - Cp xp - Dp u)
                held = g * (Ck @ xk + Dk * (r[i] - Cp @ xp))
                e = r[i] - (Cp @ xp + Dp * held)
                eps[i] = e
                xk = Ak @ xk + Bk * e
            u[i] = held
            y[i] = Cp @ xp + Dp * held
            xp = Ap @ xp + Bp * held
            if not np.isfinite(y[i]):
                raise DivergedSimulation(f"non-finite output at t = {t[i]:.4g}")
    # eps is only defined at sampling instants; hold it in between
    last = 0.0
    for i in range(n):
        if np.isnan(eps[i]):
            eps[i] = last
        else:
            last = eps[i]
    y_ref = None
    e = r - y
    if reference is not None:
        ref = step_response(reference, duration, h)
        y_ref = ref.y[:n]
        e = y_ref - y
    return SimulationTrace(t, r, eps, u, y, e, samples, y_ref=y_ref, final_value=float(y[-1]))


def _final(trace: SimulationTrace) -> float:
    if trace.final_value is not None and np.isfinite(trace.final_value):
        return float(trace.final_value)
    return float(trace.y[-1])


def mismatch_metrics(trace: SimulationTrace, reference: SimulationTrace) -> Metrics:
    """Step-response quality of ``trace`` and its distance to ``reference``.

    Overshoot and the 2% settling time are measured against the trace's own
    final value. The steady-state error is the mean of ``y_ref - y`` over the
    trailing 10% of the trace.
    """
    if len(trace.time) != len(reference.time) or not np.allclose(trace.time, reference.time, rtol=0, atol=1e-12):
        raise TimeBaseMismatch("traces do not share a time base")
    y, yr = trace.y, reference.y
    linf = float(np.max(np.abs(y - yr)))
    fin = _final(trace)
    if fin > 0:
        overshoot = max(0.0, (np.max(y) - fin) / fin * 100.0)
    elif fin < 0:
        overshoot = max(0.0, (fin - np.min(y)) / -fin * 100.0)
    else:
        overshoot = 0.0
    band = 0.02 * abs(fin) if fin != 0 else 0.0
    outside = np.flatnonzero(np.abs(y - fin) > band)
    if outside.size == 0:
        settling = float(trace.time[0])
    elif outside[-1] + 1 < len(y):
        settling = float(trace.time[outside[-1] + 1])
    else:
        settling = float("inf")
    tail = max(1, int(np.ceil(0.1 * len(y))))
    sse = float(abs(np.mean(yr[-tail:] - y[-tail:])))
    return Metrics(linf, float(overshoot), settling, sse)


def trace_distance(a: SimulationTrace, b: SimulationTrace) -> float:
    """``max |y_a - y_b|`` on the finer of the two time grids over their
    common interval, the coarser trace being linearly interpolated."""
    fine, coarse = (a, b) if len(a.time) >= len(b.time) else (b, a)
    if abs(fine.time[0] - coarse.time[0]) > 1e-12:
        raise TimeBaseMismatch("traces start at different times")
    keep = fine.time <= min(fine.time[-1], coarse.time[-1]) + 1e-12
    yc = np.interp(fine.time[keep], coarse.time, coarse.y)
    return float(np.max(np.abs(fine.y[keep] - yc)))
