"""
Model-reference controller synthesis from plant frequency samples.

Two routes are provided. The continuous route interpolates the ideal
controller ``K*(jw) = M / (P (1 - M))`` on the imaginary axis; the hybrid
route interpolates the ideal *discrete* controller

    Psi_i = M(jw_i) / ((1 - M(jw_i)) P(jw_i) R(jw_i)),  R(s) = (1 - e^{-sT}) / (sT)

at ``z_i = exp(j w_i T)`` so that the sampled-data loop (sampler, zero-order
hold, plant) matches ``M`` below the Nyquist frequency.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    AboveNyquist,
    DefectiveSpectrum,
    HoldZero,
    InputError,
    InvalidRange,
    ReferenceSaturated,
    SingularPlantSample,
)
from .loewner import (
    ErrorReport,
    InterpolationSet,
    LoewnerPencil,
    build_pencil,
    conjugate_close,
    interpolation_error,
    numerical_order,
    partition,
    realify,
    realize,
)
from .lti import (
    DescriptorSS,
    RationalTF,
    System,
    eval_tf,
    evaluate,
    freqresp,
    is_stable,
    poles,
    ss_to_tf,
    tf_to_ss,
    to_standard_form,
)

log = logging.getLogger(__name__)

SATURATION_TOL = 1e-12
PROJECTION_CLAMP = 0.999999
MARGINAL_BAND = 1e-3


@dataclass(frozen=True)
class SamplingConfig:
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidRange("sample period must be positive")

    @property
    def omega_s(self) -> float:
        return 2 * np.pi / self.T

    @property
    def omega_n(self) -> float:
        return np.pi / self.T


@dataclass(frozen=True)
class PlantData:
    """Plant frequency samples ``values[i] = P(j omega[i])``."""

    omega: np.ndarray
    values: np.ndarray
    source_note: str = ""

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.omega, dtype=float))
        v = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if w.shape != v.shape or w.ndim != 1 or w.size == 0:
            raise InputError("omega and values must be non-empty 1-D arrays of equal length")
        if np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise InputError("frequencies must be positive and strictly increasing")
        object.__setattr__(self, "omega", w)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.omega.size


def sample_plant(plant: System, omega, note: str = "") -> PlantData:
    """Exact frequency samples of a continuous plant model."""
    omega = np.asarray(omega, dtype=float)
    return PlantData(omega, freqresp(plant, omega), note or "sampled from model")


@dataclass(frozen=True)
class SynthesisOptions:
    """Grid and post-processing settings. Defaults follow the DC-motor study:
    50 log-spaced samples in ``[0.1, 0.95 omega_N]``."""

    T: float
    n_samples: int = 50
    grid: str = "log"
    omega_min: float = 0.1
    omega_max_fraction: float = 0.95
    rank_tol: float = 1e-10
    stabilize: bool = False
    reduce_to: Optional[int] = None
    reduce_first: bool = False

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidRange("sample period must be positive")
        if self.grid not in ("log", "linear"):
            raise InvalidRange(f"unknown grid {self.grid!r}")
        if not 0 < self.omega_max_fraction < 1:
            raise InvalidRange("omega_max_fraction must lie in (0, 1)")
        if self.n_samples < 2:
            raise InvalidRange("need at least two samples")
        if self.omega_min <= 0 or self.omega_min >= self.omega_max:
            raise InvalidRange(f"empty frequency range [{self.omega_min}, {self.omega_max}]")
        if self.reduce_to is not None and self.reduce_to < 1:
            raise InvalidRange("reduce_to must be positive")

    @property
    def sampling(self) -> SamplingConfig:
        return SamplingConfig(self.T)

    @property
    def omega_max(self) -> float:
        return self.omega_max_fraction * np.pi / self.T


def sample_grid(opts: SynthesisOptions) -> np.ndarray:
    lo, hi = opts.omega_min, opts.omega_max
    if opts.grid == "log":
        w = np.logspace(np.log10(lo), np.log10(hi), opts.n_samples)
    else:
        w = np.linspace(lo, hi, opts.n_samples)
    w[0], w[-1] = lo, hi
    return w


def hold_response(omega, T: float):
    """Frequency response ``(1 - e^{-jwT}) / (jwT)`` of the zero-order hold
    normalized to unit static gain."""
    x = np.asarray(omega, dtype=float) * T
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    out = np.where(small, 1 - 0.5j * x - x**2 / 6, (1 - np.exp(-1j * xs)) / (1j * xs))
    return out if out.ndim else complex(out)


def _ideal_values(plant: PlantData, M: RationalTF) -> np.ndarray:
    Mw = np.array([eval_tf(M, 1j * w) for w in plant.omega])
    sat = np.abs(1 - Mw) < SATURATION_TOL
    if np.any(sat):
        raise ReferenceSaturated(f"1 - M(jw) vanishes at w = {plant.omega[sat][0]}")
    tiny = np.abs(plant.values) < 1e-300
    if np.any(tiny):
        raise SingularPlantSample(f"plant sample is zero at w = {plant.omega[tiny][0]}")
    return Mw / ((1 - Mw) * plant.values)


def ideal_ct_controller_response(plant: PlantData, M: RationalTF) -> InterpolationSet:
    """Samples of the ideal continuous controller at ``j omega_i``."""
    return InterpolationSet(1j * plant.omega, _ideal_values(plant, M), None)


def ideal_dt_controller_response(plant: PlantData, M: RationalTF, T: float) -> InterpolationSet:
    """Samples of the ideal discrete controller at ``exp(j omega_i T)``."""
    cfg = SamplingConfig(T)
    above = plant.omega >= cfg.omega_n
    if np.any(above):
        raise AboveNyquist(f"w = {plant.omega[above][0]} is not below the Nyquist frequency {cfg.omega_n}")
    R = hold_response(plant.omega, T)
    if np.any(np.abs(R) < 1e-12):
        raise HoldZero("hold response vanishes on the grid")
    vals = _ideal_values(plant, M) / R
    return InterpolationSet(np.exp(1j * plant.omega * T), vals, T)


# --------------------------------------------------------------------------
# post-processing


def _is_marginal(p: complex, discrete: bool, band: float) -> bool:
    if discrete:
        return abs(abs(p) - 1.0) <= band
    return abs(p.real) <= band * max(1.0, abs(p))


def _is_unstable(p: complex, discrete: bool, band: float) -> bool:
    if _is_marginal(p, discrete, band):
        return False
    return abs(p) > 1.0 if discrete else p.real > 0


def _set_eigenvalues(A: np.ndarray, fix, notes: List[str]) -> np.ndarray:
    """Rebuild ``A`` with eigenvalues mapped by ``fix`` and eigenvectors kept."""
    lam, V = np.linalg.eig(A)
    new = np.array([fix(p) for p in lam])
    if np.array_equal(new, lam):
        return A
    Vn = V / np.linalg.norm(V, axis=0)
    if np.linalg.cond(Vn) > 1e12:
        notes.append("SchurFallback")
        Tm, Z = sla.schur(A.astype(complex), output="complex")
        d = np.array([fix(p) for p in np.diag(Tm)])
        Tm[np.diag_indices_from(Tm)] = d
        out = Z @ Tm @ Z.conj().T
    else:
        out = Vn @ np.diag(new) @ np.linalg.inv(Vn)
    if np.abs(out.imag).max() > 1e-8 * max(np.abs(out).max(), 1.0):
        raise DefectiveSpectrum("modified state matrix is not real")
    return out.real


def _additive_split(A, B, C, select):
    """Split ``(A, B, C)`` into ``H1 + H2`` where ``H1`` carries the
    eigenvalues accepted by ``select(re, im)`` and ``H2`` the rest."""
    Tm, Z, k = sla.schur(A, output="real", sort=select)
    Bt, Ct = Z.T @ B, C @ Z
    T11, T12, T22 = Tm[:k, :k], Tm[:k, k:], Tm[k:, k:]
    if k == 0 or k == A.shape[0]:
        return (T11, Bt[:k], Ct[:, :k]), (T22, Bt[k:], Ct[:, k:])
    # decouple: [I X; 0 I]^{-1} Tm [I X; 0 I] = diag(T11, T22)
    X = sla.solve_sylvester(T11, -T22, -T12)
    return (T11, Bt[:k] - X @ Bt[k:], Ct[:, :k]), (T22, Bt[k:], Ct[:, :k] @ X + Ct[:, k:])


def stable_projection(ss: System, method: str = "l2", clamp: float = PROJECTION_CLAMP,
                      band: float = MARGINAL_BAND) -> Tuple[DescriptorSS, List[str]]:
    """Remove the unstable dynamics of a controller.

    ``method="l2"`` (default) splits the system additively into stable and
    unstable parts and keeps the stable part plus the best stable (L2)
    approximation of the unstable part, which is its value at ``z = 0`` in
    discrete time and zero in continuous time.

    ``method="reflect"`` maps every unstable eigenvalue ``p`` to
    ``p / |p|^2`` (discrete) or ``-conj(p)`` (continuous) with eigenvectors,
    ``B``, ``C`` and ``D`` unchanged.

    Discrete poles within ``band`` of the unit circle (integral action) are
    kept and pulled inside to magnitude ``clamp``; continuous poles within
    ``band`` of the imaginary axis are kept as they are.

    Returns the projected system and a list of notes.
    """
    method = method.lower()
    if method not in ("l2", "reflect"):
        raise ValueError(f"unknown projection method {method!r}")
    discrete = ss.dt is not None
    std = to_standard_form(ss)
    notes: List[str] = []
    if std.order == 0:
        return std, notes
    A, (scal, _) = sla.matrix_balance(std.A, permute=False, separate=True)
    B = std.B / scal[:, None]
    C = std.C * scal[None, :]
    D = std.D
    lam = np.linalg.eigvals(A)
    unstable = np.array([_is_unstable(p, discrete, band) for p in lam])
    marginal = np.array([discrete and _is_marginal(p, True, band) and abs(p) > clamp for p in lam])
    if not unstable.any() and not marginal.any():
        return ss if isinstance(ss, DescriptorSS) else std, notes

    def clamp_marginal(p):
        if discrete and _is_marginal(p, True, band) and abs(p) > clamp:
            notes.append("MarginalPole")
            return p / abs(p) * clamp
        return p

    if method == "reflect":
        def fix(p):
            if _is_unstable(p, discrete, band):
                if not discrete:
                    return -np.conj(p)
                q = p / abs(p) ** 2
                return q / abs(q) * clamp if abs(q) > clamp else q
            return clamp_marginal(p)

        A = _set_eigenvalues(A, fix, notes)
        if unstable.any():
            notes.append(f"reflected {int(unstable.sum())} pole(s)")
        return DescriptorSS(None, A, B, C, D, std.dt), notes

    keep = (lambda x, y: abs(complex(x, y)) < 1 + band) if discrete else \
        (lambda x, y: x <= band * max(1.0, abs(complex(x, y))))
    (A, B, C), (Au, Bu, Cu) = _additive_split(A, B, C, keep)
    if Au.shape[0]:
        if discrete:
            D = D + (-Cu @ np.linalg.solve(Au, Bu)).item()
        notes.append(f"removed {Au.shape[0]} unstable pole(s)")
    if A.shape[0]:
        A = _set_eigenvalues(A, clamp_marginal, notes)
        nb, nc = np.linalg.norm(B), np.linalg.norm(C)
        if nb > 0 and nc > 0:
            alpha = np.sqrt(nb / nc)
            B, C = B / alpha, C * alpha
    return DescriptorSS(None, A, B, C, D, std.dt), notes


def _psd_factor(W):
    w, U = np.linalg.eigh((W + W.T) / 2)
    return U * np.sqrt(np.clip(w, 0.0, None))


def _balance(A, B, C, r, discrete):
    if discrete:
        Wc = sla.solve_discrete_lyapunov(A, B @ B.T)
        Wo = sla.solve_discrete_lyapunov(A.T, C.T @ C)
    else:
        Wc = sla.solve_continuous_lyapunov(A, -B @ B.T)
        Wo = sla.solve_continuous_lyapunov(A.T, -C.T @ C)
    Lc, Lo = _psd_factor(Wc), _psd_factor(Wo)
    U, hsv, Vt = np.linalg.svd(Lo.T @ Lc)
    r = min(r, int(np.sum(hsv > hsv[0] * 1e-14))) if hsv.size and hsv[0] > 0 else 0
    S = np.diag(hsv[:r] ** -0.5)
    Tl = S @ U[:, :r].T @ Lo.T
    Tr = Lc @ Vt[:r].T @ S
    return Tl @ A @ Tr, Tl @ B, C @ Tr, hsv


def balanced_truncation(ss: System, r: int,
                        band: float = MARGINAL_BAND) -> Tuple[DescriptorSS, np.ndarray]:
    """Square-root balanced truncation of a stable system to order ``r``.

    Poles within ``band`` of the stability boundary (integral action) would
    dominate the Gramians, so they are split off, kept exactly, and only the
    remaining part is balanced and truncated to ``r`` minus their number.

    Returns the reduced system and the Hankel singular values of the
    balanced part.
    """
    std = to_standard_form(ss)
    if not is_stable(std):
        raise ValueError("balanced truncation needs a stable system")
    discrete = std.dt is not None
    A, B, C = np.real(std.A), np.real(std.B), np.real(std.C)
    if discrete:
        inner = lambda x, y: abs(complex(x, y)) < 1 - band
    else:
        inner = lambda x, y: x < -band * max(1.0, abs(complex(x, y)))
    (As, Bs, Cs), (Am, Bm, Cm) = _additive_split(A, B, C, inner)
    keep = max(r - Am.shape[0], 0)
    Ar, Br, Cr, hsv = _balance(As, Bs, Cs, keep, discrete)
    A = sla.block_diag(Ar, Am)
    B = np.vstack([Br, Bm])
    C = np.hstack([Cr, Cm])
    return DescriptorSS(None, A, B, C, std.D, std.dt), hsv


def reduce_order(source: Union[LoewnerPencil, System], r: int) -> DescriptorSS:
    """Order-``r`` approximation.

    A Loewner pencil is truncated on its dominant singular subspaces; a
    (stable) system is reduced by balanced truncation.
    """
    if isinstance(source, LoewnerPencil):
        return realize(source, r)
    return balanced_truncation(source, r)[0]


# --------------------------------------------------------------------------
# reports


@dataclass
class StageRecord:
    stage: str
    action: str
    max_rel_error: float
    delta: float

    def as_dict(self):
        return {"stage": self.stage, "action": self.action,
                "max_rel_error": self.max_rel_error, "delta": self.delta}


@dataclass
class SynthesisReport:
    chosen_order: int
    singular_values: np.ndarray
    interp_error_raw: ErrorReport
    interp_error_after_projection: Optional[ErrorReport] = None
    interp_error_after_reduction: Optional[ErrorReport] = None
    controller_stable: bool = False
    hybrid_loop_verdict: Optional[object] = None
    stage_log: List[StageRecord] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    final_order: int = 0

    def log_stage(self, stage, action, err: ErrorReport):
        prev = self.stage_log[-1].max_rel_error if self.stage_log else 0.0
        self.stage_log.append(StageRecord(stage, action, err.max_rel, err.max_rel - prev))

    def as_dict(self):
        def er(e):
            return None if e is None else e.as_dict()

        verdict = self.hybrid_loop_verdict
        return {
            "chosen_order": self.chosen_order,
            "final_order": self.final_order,
            "singular_values": [float(s) for s in self.singular_values],
            "interp_error_raw": er(self.interp_error_raw),
            "interp_error_after_projection": er(self.interp_error_after_projection),
            "interp_error_after_reduction": er(self.interp_error_after_reduction),
            "controller_stable": bool(self.controller_stable),
            "hybrid_loop_verdict": None if verdict is None else verdict.as_dict(),
            "stage_log": [s.as_dict() for s in self.stage_log],
            "notes": list(self.notes),
        }


@dataclass
class SynthesisResult:
    controller: DescriptorSS
    tf: RationalTF
    report: SynthesisReport
    data: InterpolationSet
    pencil: LoewnerPencil


def _as_plant_data(plant, grid) -> PlantData:
    if isinstance(plant, PlantData):
        return plant
    return sample_plant(plant, grid)


def _finalize(ss: System) -> Tuple[DescriptorSS, RationalTF]:
    tf = ss_to_tf(ss) if isinstance(ss, DescriptorSS) else ss
    num, den = np.asarray(tf.num), np.asarray(tf.den)
    for c in (num, den):
        if np.iscomplexobj(c) and np.abs(c.imag).max() > 1e-8 * np.abs(c).max():
            raise DefectiveSpectrum("controller coefficients are not real")
    tf = RationalTF(np.real(num), np.real(den), tf.dt)
    return tf_to_ss(tf), tf


def _loewner_stage(data: InterpolationSet, rank_tol: float, order: Optional[int]):
    closed = conjugate_close(data)
    left, right = partition(closed)
    pencil = realify(build_pencil(left, right))
    decision = numerical_order(pencil, rank_tol)
    r = max(decision.r, 1) if order is None else order
    r = min(r, min(pencil.shape))
    ss = realize(pencil, r)
    report = SynthesisReport(r, decision.sv_row, interpolation_error(ss, data))
    report.log_stage("loewner", f"realized order {r}", report.interp_error_raw)
    if r == min(pencil.shape):
        report.notes.append("ShortData")
        log.warning("order %d saturates the Loewner pencil; data may be too short", r)
    return ss, pencil, report


def synthesize_hlddc(plant: Union[PlantData, System], M: RationalTF, opts: SynthesisOptions,
                     projection: str = "l2") -> SynthesisResult:
    """Discrete controller whose sampled-data loop with ``plant`` matches ``M``.

    ``plant`` is either measured samples (used as given; they must lie below
    the Nyquist frequency) or a continuous model sampled on
    ``sample_grid(opts)``. With ``opts.stabilize`` the realization is
    projected onto its stable part; with ``opts.reduce_to`` it is reduced,
    after the projection unless ``opts.reduce_first`` is set.
    """
    pdata = _as_plant_data(plant, sample_grid(opts))
    data = ideal_dt_controller_response(pdata, M, opts.T)
    ss, pencil, report = _loewner_stage(data, opts.rank_tol, None)
    r = report.chosen_order

    def project(sys):
        out, notes = stable_projection(sys, method=projection)
        report.notes.extend(notes)
        err = interpolation_error(out, data)
        report.interp_error_after_projection = err
        report.log_stage("projection", "; ".join(notes) or "no unstable poles", err)
        return out

    def reduce(sys, source):
        k = opts.reduce_to
        current = sys.order
        if k >= current:
            report.notes.append(f"reduce_to={k} not below order {current}; skipped")
            err = interpolation_error(sys, data)
            report.interp_error_after_reduction = err
            report.log_stage("reduction", "skipped", err)
            return sys
        out = reduce_order(source, k)
        err = interpolation_error(out, data)
        report.interp_error_after_reduction = err
        how = "Loewner truncation" if isinstance(source, LoewnerPencil) else "balanced truncation"
        report.log_stage("reduction", f"{how} to order {k}", err)
        return out

    if opts.reduce_first:
        if opts.reduce_to is not None:
            ss = reduce(ss, pencil)
        if opts.stabilize:
            ss = project(ss)
    else:
        if opts.stabilize:
            ss = project(ss)
        if opts.reduce_to is not None:
            if opts.stabilize and is_stable(ss):
                ss = reduce(ss, ss)
            else:
                ss = reduce(ss, pencil)

    ctrl, tf = _finalize(ss)
    report.final_order = tf.order
    report.controller_stable = is_stable(tf)
    return SynthesisResult(ctrl, tf, report, data, pencil)


def synthesize_lddc_continuous(plant: Union[PlantData, System], M: RationalTF,
                               omega=None, rank_tol: float = 1e-10,
                               order: Optional[int] = None,
                               stabilize: bool = False) -> SynthesisResult:
    """Continuous-time controller interpolating ``K*(j omega_i)``.

    Default grid: 100 log-spaced samples in ``[0.1, 1e3]`` rad/s. With
    ``stabilize`` the right-half-plane part of the interpolant is dropped.
    """
    if omega is None:
        omega = np.logspace(-1, 3, 100)
    pdata = _as_plant_data(plant, omega)
    data = ideal_ct_controller_response(pdata, M)
    ss, pencil, report = _loewner_stage(data, rank_tol, order)
    if stabilize:
        ss, notes = stable_projection(ss, method="l2")
        report.notes.extend(notes)
        err = interpolation_error(ss, data)
        report.interp_error_after_projection = err
        report.log_stage("projection", "; ".join(notes) or "no unstable poles", err)
    ctrl, tf = _finalize(ss)
    report.final_order = tf.order
    report.controller_stable = is_stable(tf)
    return SynthesisResult(ctrl, tf, report, data, pencil)
