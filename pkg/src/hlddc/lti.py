"""
SISO LTI building blocks: rational transfer functions, descriptor state-space
models, conversions between them, Tustin and zero-order-hold discretization,
and step-response simulation.

Systems carry a sample period ``dt``: ``None`` means continuous time (the
variable is ``s``), a positive float means discrete time with period ``dt``
(the variable is ``z``). Polynomial coefficients are stored in descending
powers, as in ``numpy.polyval``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateFit,
    ImproperTF,
    NonStandardForm,
    PoleHit,
    SingularPencil,
)

_EPS = np.finfo(float).eps


def _as_poly(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs))
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    if not np.iscomplexobj(c):
        c = c.astype(float)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return c[-1:] * 0 if c.size else np.zeros(1)
    return c[nz[0]:]


@dataclass(frozen=True)
class RationalTF:
    """SISO transfer function ``num(x) / den(x)``.

    The denominator is normalized to be monic on construction and the
    function must be proper.
    """

    num: np.ndarray
    den: np.ndarray
    dt: Optional[float] = None

    def __post_init__(self):
        num = _as_poly(self.num)
        den = _as_poly(self.den)
        if den.size == 0 or den[0] == 0:
            raise ValueError("denominator must have a nonzero leading coefficient")
        if num.size > den.size:
            raise ImproperTF(f"numerator degree {num.size - 1} exceeds denominator degree {den.size - 1}")
        lead = den[0]
        object.__setattr__(self, "num", num / lead)
        object.__setattr__(self, "den", den / lead)
        if self.dt is not None and not self.dt > 0:
            raise ValueError("sample period must be positive")

    @classmethod
    def gain(cls, k, dt=None) -> "RationalTF":
        return cls([k], [1.0], dt)

    @property
    def order(self) -> int:
        return self.den.size - 1

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def __call__(self, x):
        x = np.asarray(x)
        return np.polyval(self.num, x) / np.polyval(self.den, x)

    def dc_gain(self) -> complex:
        return eval_tf(self, 1.0 if self.is_discrete else 0.0)


@dataclass(frozen=True)
class DescriptorSS:
    """Descriptor system ``E x' = A x + B u``, ``y = C x + D u``.

    ``E`` may be singular; ``x'`` is the derivative (continuous) or the shift
    (discrete). ``B`` is ``n x 1`` and ``C`` is ``1 x n``.
    """

    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: complex = 0.0
    dt: Optional[float] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A))
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        E = np.eye(n) if self.E is None else np.asarray(self.E).reshape(n, n)
        B = np.asarray(self.B).reshape(n, 1)
        C = np.asarray(self.C).reshape(1, n)
        for name, val in (("E", E), ("A", A), ("B", B), ("C", C)):
            object.__setattr__(self, name, val)
        D = complex(self.D)
        object.__setattr__(self, "D", D if D.imag != 0 else D.real)
        if self.dt is not None and not self.dt > 0:
            raise ValueError("sample period must be positive")

    @property
    def order(self) -> int:
        return self.A.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(m) for m in (self.E, self.A, self.B, self.C)) or isinstance(self.D, complex)

    @property
    def is_standard(self) -> bool:
        return np.array_equal(self.E, np.eye(self.order))

    def __call__(self, x):
        x = np.asarray(x)
        if x.ndim == 0:
            return eval_ss(self, complex(x))
        return np.array([eval_ss(self, complex(v)) for v in x.ravel()]).reshape(x.shape)


System = Union[RationalTF, DescriptorSS]


# --------------------------------------------------------------------------
# evaluation


def eval_tf(tf: RationalTF, point: complex) -> complex:
    """Evaluate ``tf`` at a single point with Horner's rule.

    Raises PoleHit when the denominator vanishes relative to the size of its
    terms at ``point``.
    """
    x = complex(point)
    den = np.polyval(tf.den, x)
    powers = np.abs(x) ** np.arange(tf.den.size - 1, -1, -1)
    scale = float(np.sum(np.abs(tf.den) * powers))
    if abs(den) <= 64 * _EPS * scale:
        raise PoleHit(f"denominator vanishes at {x}")
    return complex(np.polyval(tf.num, x) / den)


def eval_ss(ss: DescriptorSS, point: complex) -> complex:
    """Evaluate ``C (point E - A)^{-1} B + D``."""
    if ss.order == 0:
        return complex(ss.D)
    M = complex(point) * ss.E - ss.A
    try:
        with warnings.catch_warnings():
            # exact singularity is reported below as PoleHit
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(M, check_finite=True)
    except (sla.LinAlgError, ValueError) as exc:
        raise PoleHit(f"pencil singular at {point}") from exc
    udiag = np.abs(np.diag(lu))
    if udiag.min() <= 64 * _EPS * max(udiag.max(), np.abs(M).max()):
        raise PoleHit(f"pencil singular at {point}")
    x = sla.lu_solve((lu, piv), ss.B)
    return complex((ss.C @ x).item() + ss.D)


def evaluate(sys: System, point: complex) -> complex:
    if isinstance(sys, RationalTF):
        return eval_tf(sys, point)
    return eval_ss(sys, point)


def freqresp(sys: System, omega) -> np.ndarray:
    """Frequency response at ``j*omega`` (continuous) or ``exp(j*omega*dt)``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    pts = np.exp(1j * omega * sys.dt) if sys.dt is not None else 1j * omega
    return np.array([evaluate(sys, p) for p in pts])


# --------------------------------------------------------------------------
# conversions


def tf_to_ss(tf: RationalTF) -> DescriptorSS:
    """Controllable canonical realization with ``E = I`` and explicit ``D``."""
    if not isinstance(tf, RationalTF):
        raise TypeError("tf_to_ss expects a RationalTF")
    n = tf.order
    num = np.concatenate([np.zeros(n + 1 - tf.num.size, dtype=tf.num.dtype), tf.num])
    D = num[0]
    if n == 0:
        return DescriptorSS(np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), D, tf.dt)
    a = tf.den[1:]
    A = np.zeros((n, n), dtype=np.result_type(a, float))
    A[0, :] = -a
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (num[1:] - D * a).reshape(1, n)
    return DescriptorSS(np.eye(n), A, B, C, D, tf.dt)


def finite_eigenvalues(ss: DescriptorSS, inf_tol: float = 1e-11) -> np.ndarray:
    """Finite generalized eigenvalues of the pencil ``(A, E)``."""
    if ss.order == 0:
        return np.zeros(0, dtype=complex)
    if ss.is_standard:
        return np.linalg.eigvals(ss.A).astype(complex)
    return _finite_pencil_eigs(ss.A, ss.E, inf_tol)


def _finite_pencil_eigs(A, E, inf_tol):
    na = max(np.linalg.norm(A), 1e-300)
    ne = np.linalg.norm(E)
    if ne == 0:
        return np.zeros(0, dtype=complex)
    alpha, beta = sla.eigvals(A / na, E / ne, homogeneous_eigvals=True)
    if np.any((np.abs(alpha) < 1e-14) & (np.abs(beta) < 1e-14)):
        raise SingularPencil("pencil is not regular")
    finite = np.abs(beta) > inf_tol * np.abs(alpha)
    return (alpha[finite] / beta[finite]) * (na / ne)


def transmission_zeros(ss: DescriptorSS, inf_tol: float = 1e-11) -> np.ndarray:
    """Finite zeros from the system pencil ``[[A, B], [C, D]] - s [[E, 0], [0, 0]]``."""
    n = ss.order
    if n == 0:
        return np.zeros(0, dtype=complex)
    # input/output scaling leaves the zeros unchanged and keeps the pencil balanced
    na = max(np.linalg.norm(ss.A), np.linalg.norm(ss.E), 1e-300)
    nb, nc = np.linalg.norm(ss.B), np.linalg.norm(ss.C)
    if nb == 0 or nc == 0:
        return np.zeros(0, dtype=complex)
    bs, cs = na / nb, na / nc
    Z = np.zeros((n + 1, n + 1), dtype=np.result_type(ss.A, ss.B, ss.C, complex(ss.D)))
    Z[:n, :n] = ss.A
    Z[:n, n:] = ss.B * bs
    Z[n:, :n] = ss.C * cs
    Z[n, n] = ss.D * bs * cs
    F = np.zeros_like(Z)
    F[:n, :n] = ss.E
    try:
        return _finite_pencil_eigs(Z, F, inf_tol)
    except SingularPencil:
        # identically zero transfer function
        return np.zeros(0, dtype=complex)


def ss_to_tf(ss: DescriptorSS, strip_tol: float = 1e-8) -> RationalTF:
    """Transfer function of a (possibly descriptor) realization.

    Poles and zeros are the finite generalized eigenvalues of the state and
    system pencils. The gain is fixed, and the result verified, on ``2k + 2``
    probe points on a circle of twice the spectral radius. Pole/zero pairs
    closer than ``strip_tol`` (relative) are cancelled.
    """
    if ss.order == 0:
        return RationalTF([ss.D], [1.0], ss.dt)
    p = finite_eigenvalues(ss)
    z = transmission_zeros(ss)
    k = p.size
    if z.size > k:
        raise DegenerateFit(f"realization is improper ({z.size} finite zeros, {k} finite poles)")
    rho = float(np.max(np.abs(np.concatenate([p, z])))) if (k or z.size) else 0.0
    radius = 2.0 * rho if rho > 0 else 1.0
    m = 2 * k + 2
    probes = radius * np.exp(1j * (2 * np.pi * np.arange(m) / m + 0.3141592653589793 / m))
    H, shape = [], []
    for x in probes:
        try:
            h = eval_ss(ss, x)
        except PoleHit:
            continue
        H.append(h)
        shape.append(np.prod(x - z) / np.prod(x - p))
    H, shape = np.array(H), np.array(shape)
    if H.size == 0:
        raise SingularPencil("resolvent could not be evaluated at the probe points")
    if np.all(np.abs(H) == 0):
        return RationalTF([0.0], [1.0], ss.dt)
    gain = np.vdot(shape, H) / np.vdot(shape, shape)
    resid = np.linalg.norm(gain * shape - H)
    if resid > 1e-6 * np.linalg.norm(H) + 1e-13 * np.abs(shape * gain).max():
        raise DegenerateFit(f"pole/zero model does not reproduce the realization (residual {resid:.2e})")
    zs, ps = _cancel(z, p, strip_tol)
    num = gain * np.poly(zs) if zs.size else np.array([gain])
    den = np.poly(ps) if ps.size else np.ones(1)
    if not ss.is_complex:
        num, den = num.real, den.real
    else:
        num, den = _maybe_real(num), _maybe_real(den)
    return RationalTF(num, den, ss.dt)


def _cancel(zeros, poles, tol):
    zeros = list(zeros)
    kept = []
    for p in poles:
        scale = max(1.0, abs(p))
        d = [abs(z - p) for z in zeros]
        if d and min(d) <= tol * scale:
            zeros.pop(int(np.argmin(d)))
        else:
            kept.append(p)
    return np.array(zeros, dtype=complex), np.array(kept, dtype=complex)


def _maybe_real(c, tol=1e-8):
    c = np.asarray(c)
    if np.all(np.abs(c.imag) <= tol * max(np.abs(c).max(), 1e-300)):
        return c.real
    return c


def to_standard_form(sys: System) -> DescriptorSS:
    """Standard form (``E = I``) realization of any system."""
    if isinstance(sys, DescriptorSS):
        if sys.is_standard:
            return sys
        sys = ss_to_tf(sys)
    return tf_to_ss(sys)


def as_tf(sys: System) -> RationalTF:
    return sys if isinstance(sys, RationalTF) else ss_to_tf(sys)


# --------------------------------------------------------------------------
# poles and stability


def poles(sys: System) -> np.ndarray:
    if isinstance(sys, RationalTF):
        return np.roots(sys.den).astype(complex)
    return finite_eigenvalues(sys)


def is_stable(sys: System) -> bool:
    p = poles(sys)
    if sys.dt is None:
        return bool(np.all(p.real < 0))
    return bool(np.all(np.abs(p) < 1))


# --------------------------------------------------------------------------
# discretization


def tustin_discretize(sys: System, T: float) -> RationalTF:
    """Bilinear transform ``s = (2/T)(z - 1)/(z + 1)``."""
    if T <= 0:
        raise ValueError("sample period must be positive")
    tf = as_tf(sys)
    if tf.dt is not None:
        raise ValueError("system is already discrete")
    n = tf.order
    num = np.concatenate([np.zeros(n + 1 - tf.num.size), tf.num])
    c = 2.0 / T
    znum = np.zeros(n + 1, dtype=np.result_type(num, float))
    zden = np.zeros(n + 1, dtype=np.result_type(tf.den, float))
    for k in range(n + 1):
        p = n - k  # power of s
        term = c**p * np.polymul(np.poly(np.ones(p)), np.poly(-np.ones(k)))
        znum = znum + num[k] * term
        zden = zden + tf.den[k] * term
    return RationalTF(znum, zden, T)


def matrix_exponential(M) -> np.ndarray:
    """Scaling-and-squaring Pade matrix exponential."""
    return sla.expm(np.asarray(M))


def zoh_discretize(sys: System, T: float) -> DescriptorSS:
    """Zero-order-hold discretization via the augmented matrix exponential."""
    if T <= 0:
        raise ValueError("sample period must be positive")
    ss = to_standard_form(sys)
    if ss.dt is not None:
        raise ValueError("system is already discrete")
    if not ss.is_standard:
        raise NonStandardForm("E is not the identity")
    n = ss.order
    if n == 0:
        return DescriptorSS(ss.E, ss.A, ss.B, ss.C, ss.D, T)
    aug = np.zeros((n + 1, n + 1), dtype=np.result_type(ss.A, ss.B))
    aug[:n, :n] = ss.A
    aug[:n, n:] = ss.B
    ex = matrix_exponential(T * aug)
    return DescriptorSS(np.eye(n), ex[:n, :n], ex[:n, n:], ss.C, ss.D, T)


# --------------------------------------------------------------------------
# simulation


@dataclass
class SimulationTrace:
    """Time-stamped signals of a loop driven by a step reference.

    ``eps`` holds the sampled error, ``e`` the mismatch with the reference
    model output ``y_ref`` when one is available (otherwise ``r - y``).
    """

    time: np.ndarray
    r: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    y: np.ndarray
    e: np.ndarray
    sample_instants: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    y_ref: Optional[np.ndarray] = None
    final_value: Optional[float] = None

    def __post_init__(self):
        n = len(self.time)
        for name in ("r", "eps", "u", "y", "e"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"signal {name} has length {len(getattr(self, name))}, expected {n}")
        if self.y_ref is not None and len(self.y_ref) != n:
            raise ValueError("y_ref length mismatch")


def simulate_discrete(ss: DescriptorSS, u: np.ndarray) -> np.ndarray:
    """Output of a standard-form discrete system driven by ``u`` from rest."""
    A, B, C, D = ss.A, ss.B[:, 0], ss.C[0], ss.D
    x = np.zeros(ss.order, dtype=np.result_type(A, B))
    y = np.empty(len(u), dtype=np.result_type(A, B, float))
    for k, uk in enumerate(u):
        y[k] = C @ x + D * uk
        x = A @ x + B * uk
    return np.real_if_close(y)


def step_response(sys: System, duration: float, dt: float = 0.01) -> SimulationTrace:
    """Unit-step response.

    Continuous systems are ZOH-discretized at ``dt`` (exact for a step
    input); discrete systems are stepped at their own period.
    """
    if dt <= 0 or duration <= 0:
        raise ValueError("duration and dt must be positive")
    if sys.dt is None:
        h = dt
        dss = zoh_discretize(sys, h)
    else:
        h = sys.dt
        dss = to_standard_form(sys)
    n = int(np.floor(duration / h + 1e-9)) + 1
    t = h * np.arange(n)
    u = np.ones(n)
    y = np.real(simulate_discrete(dss, u))
    try:
        final = float(np.real(as_tf(sys).dc_gain())) if is_stable(sys) else float(y[-1])
    except PoleHit:
        final = float(y[-1])
    return SimulationTrace(
        time=t,
        r=u.copy(),
        eps=u - y,
        u=u,
        y=y,
        e=u - y,
        sample_instants=np.arange(n),
        final_value=final,
    )
