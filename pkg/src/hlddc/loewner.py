"""
Loewner-framework rational interpolation of SISO frequency data.

The data set is split into left data ``(mu_i, v_i)`` and right data
``(lam_j, w_j)``. The Loewner and shifted Loewner matrices are

    L[i, j]  = (v_i - w_j) / (mu_i - lam_j)
    Ls[i, j] = (mu_i v_i - lam_j w_j) / (mu_i - lam_j)

and a descriptor realization of the interpolant is obtained by projecting
the pencil ``(Ls, L)`` on its dominant singular subspaces:

    E = -Y^H L X,  A = -Y^H Ls X,  B = Y^H V,  C = W X.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as sla

from .errors import (
    InconsistentConjugate,
    NodeCollision,
    PoleHit,
    RankDeficientProjection,
    ResidualImaginary,
    TooFewPoints,
)
from .lti import DescriptorSS, RationalTF, evaluate

CONJ_TOL = 1e-12


@dataclass(frozen=True)
class InterpolationSet:
    """Complex interpolation data ``values[i] = H(nodes[i])``.

    ``dt`` is ``None`` for s-plane nodes and the sample period for z-plane
    nodes.
    """

    nodes: np.ndarray
    values: np.ndarray
    dt: Optional[float] = None

    def __post_init__(self):
        nodes = np.atleast_1d(np.asarray(self.nodes, dtype=complex))
        values = np.atleast_1d(np.asarray(self.values, dtype=complex))
        if nodes.shape != values.shape or nodes.ndim != 1:
            raise ValueError("nodes and values must be 1-D arrays of equal length")
        if nodes.size != np.unique(nodes).size:
            raise NodeCollision("interpolation nodes must be pairwise distinct")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.nodes.size


@dataclass(frozen=True)
class LoewnerPencil:
    L: np.ndarray
    Ls: np.ndarray
    V: np.ndarray  # p x 1
    W: np.ndarray  # 1 x q
    left: InterpolationSet
    right: InterpolationSet
    realified: bool = False

    @property
    def dt(self):
        return self.left.dt

    @property
    def shape(self):
        return self.L.shape


@dataclass(frozen=True)
class OrderDecision:
    r: int
    sv_row: np.ndarray  # singular values of [L, Ls]
    sv_col: np.ndarray  # singular values of [L; Ls]
    tol_rel: float


@dataclass(frozen=True)
class ErrorReport:
    max_abs: float
    max_rel: float
    per_node_abs: np.ndarray
    per_node_rel: np.ndarray

    def as_dict(self):
        return {
            "max_abs": float(self.max_abs),
            "max_rel": float(self.max_rel),
            "per_node_abs": [float(v) for v in self.per_node_abs],
            "per_node_rel": [float(v) for v in self.per_node_rel],
        }


def _is_real_node(x: complex) -> bool:
    return x.imag == 0.0


def _groups(s: InterpolationSet):
    """Index groups: ``(i,)`` for real nodes, ``(i, j)`` for conjugate pairs
    with ``Im(nodes[i]) > 0``. Raises if a complex node has no conjugate."""
    nodes = s.nodes
    used = np.zeros(nodes.size, dtype=bool)
    groups = []
    for i, x in enumerate(nodes):
        if used[i]:
            continue
        used[i] = True
        if _is_real_node(x):
            groups.append((i,))
            continue
        target = np.conj(x)
        cand = np.flatnonzero(~used & (np.abs(nodes - target) <= 1e-14 * max(1.0, abs(x))))
        if cand.size == 0:
            raise InconsistentConjugate(f"node {x} has no conjugate partner")
        j = int(cand[0])
        used[j] = True
        groups.append((i, j) if x.imag > 0 else (j, i))
    return groups


def conjugate_close(s: InterpolationSet) -> InterpolationSet:
    """Add missing conjugate pairs ``(conj(node), conj(value))``.

    The output lists each pair adjacently, upper-half-plane node first, in
    order of first appearance. Real nodes must carry real values.
    """
    out_n, out_v = [], []
    seen = {}
    for x, v in zip(s.nodes, s.values):
        if _is_real_node(x):
            if abs(v.imag) > CONJ_TOL * max(1.0, abs(v)):
                raise InconsistentConjugate(f"real node {x.real} carries non-real value {v}")
            out_n.append(x)
            out_v.append(complex(v.real, 0.0))
            continue
        key_node = x if x.imag > 0 else np.conj(x)
        key_val = v if x.imag > 0 else np.conj(v)
        if key_node in seen:
            prev = seen[key_node]
            if abs(prev - key_val) > CONJ_TOL * max(1.0, abs(prev)):
                raise InconsistentConjugate(f"conjugate node of {x} carries an inconsistent value")
            continue
        seen[key_node] = key_val
        out_n.extend([key_node, np.conj(key_node)])
        out_v.extend([key_val, np.conj(key_val)])
    return InterpolationSet(np.array(out_n), np.array(out_v), s.dt)


def partition(s: InterpolationSet):
    """Split conjugate-closed data into disjoint left and right sets.

    Groups (conjugate pairs or real nodes) are sorted by distance along the
    frequency axis (``|Im|`` in the s-plane, ``|arg|`` in the z-plane) and
    dealt alternately, starting with the left side.
    """
    groups = _groups(s)
    if len(groups) < 2:
        raise TooFewPoints("at least two conjugate pairs or real nodes are needed")
    if s.dt is None:
        key = [abs(s.nodes[g[0]].imag) for g in groups]
    else:
        key = [abs(np.angle(s.nodes[g[0]])) for g in groups]
    order = np.argsort(key, kind="stable")
    left_idx, right_idx = [], []
    for rank, gi in enumerate(order):
        (left_idx if rank % 2 == 0 else right_idx).extend(groups[gi])
    left = InterpolationSet(s.nodes[left_idx], s.values[left_idx], s.dt)
    right = InterpolationSet(s.nodes[right_idx], s.values[right_idx], s.dt)
    return left, right


def build_pencil(left: InterpolationSet, right: InterpolationSet) -> LoewnerPencil:
    mu, v = left.nodes, left.values
    lam, w = right.nodes, right.values
    diff = mu[:, None] - lam[None, :]
    scale = np.maximum(1.0, np.abs(mu)[:, None])
    if np.any(np.abs(diff) <= 1e-14 * scale):
        raise NodeCollision("left and right data share a node")
    L = (v[:, None] - w[None, :]) / diff
    Ls = (mu[:, None] * v[:, None] - lam[None, :] * w[None, :]) / diff
    return LoewnerPencil(L, Ls, v.reshape(-1, 1), w.reshape(1, -1), left, right)


def _pair_transform(s: InterpolationSet) -> np.ndarray:
    """Block-unitary matrix mapping conjugate-pair coordinates to real ones."""
    n = len(s)
    J = np.zeros((n, n), dtype=complex)
    blk = np.array([[1.0, -1.0j], [1.0, 1.0j]]) / np.sqrt(2.0)
    col = 0
    for g in _groups(s):
        if len(g) == 1:
            J[g[0], col] = 1.0
            col += 1
        else:
            i, j = g
            J[i, col:col + 2] = blk[0]
            J[j, col:col + 2] = blk[1]
            col += 2
    return J


def realify(pencil: LoewnerPencil, tol: float = 1e-8) -> LoewnerPencil:
    """Transform a pencil built on conjugate-closed data to real arithmetic.

    Each conjugate pair is mapped to (real part, imaginary part) coordinates
    on both sides; the transfer function of any realization is unchanged.
    """
    if pencil.realified:
        return pencil
    JL = _pair_transform(pencil.left)
    JR = _pair_transform(pencil.right)
    mats = {
        "L": JL.conj().T @ pencil.L @ JR,
        "Ls": JL.conj().T @ pencil.Ls @ JR,
        "V": JL.conj().T @ pencil.V,
        "W": pencil.W @ JR,
    }
    for name, m in mats.items():
        nrm = np.abs(m).max() if m.size else 0.0
        if m.size and np.abs(m.imag).max() > tol * max(nrm, 1e-300):
            raise ResidualImaginary(
                f"{name} keeps imaginary part {np.abs(m.imag).max():.2e} (norm {nrm:.2e}); "
                "data are not conjugate symmetric"
            )
    return LoewnerPencil(
        mats["L"].real, mats["Ls"].real, mats["V"].real, mats["W"].real,
        pencil.left, pencil.right, realified=True,
    )


def _svd_row_col(pencil: LoewnerPencil):
    Y, s_row, _ = sla.svd(np.hstack([pencil.L, pencil.Ls]), full_matrices=False)
    _, s_col, Xh = sla.svd(np.vstack([pencil.L, pencil.Ls]), full_matrices=False)
    return Y, s_row, Xh.conj().T, s_col


def numerical_order(pencil: LoewnerPencil, tol_rel: float = 1e-10) -> OrderDecision:
    """Numerical rank of the stacked Loewner matrices."""
    s_row = sla.svdvals(np.hstack([pencil.L, pencil.Ls]))
    s_col = sla.svdvals(np.vstack([pencil.L, pencil.Ls]))

    def count(sv):
        if sv.size == 0 or sv[0] == 0:
            return 0
        return int(np.sum(sv > tol_rel * sv[0]))

    return OrderDecision(max(count(s_row), count(s_col)), s_row, s_col, tol_rel)


def realize(pencil: LoewnerPencil, r: int) -> DescriptorSS:
    """Order-``r`` descriptor realization from the projected pencil."""
    p, q = pencil.shape
    if not 1 <= r <= min(p, q):
        raise ValueError(f"order {r} outside [1, {min(p, q)}]")
    Y, _, X, _ = _svd_row_col(pencil)
    Y = Y[:, :r]
    X = X[:, :r]
    Yh = Y.conj().T
    E = -Yh @ pencil.L @ X
    A = -Yh @ pencil.Ls @ X
    B = Yh @ pencil.V
    C = pencil.W @ X
    rank_e = np.linalg.matrix_rank(E, tol=1e-12 * max(np.abs(E).max(), np.abs(A).max(), 1e-300) * r)
    if rank_e < r - 1:
        warnings.warn(
            f"projected Loewner matrix has rank {rank_e} < {r - 1}",
            RankDeficientProjection,
            stacklevel=2,
        )
    return DescriptorSS(E, A, B, C, 0.0, pencil.dt)


def interpolation_error(sys: Union[RationalTF, DescriptorSS], data: InterpolationSet) -> ErrorReport:
    """Absolute and relative mismatch of ``sys`` at every data node."""
    err = np.empty(len(data))
    for i, (x, v) in enumerate(zip(data.nodes, data.values)):
        try:
            err[i] = abs(evaluate(sys, x) - v)
        except PoleHit:
            err[i] = np.inf
    rel = err / np.maximum(np.abs(data.values), 1e-14)
    if err.size == 0:
        return ErrorReport(0.0, 0.0, err, rel)
    return ErrorReport(float(err.max()), float(rel.max()), err, rel)


def loewner_fit(data: InterpolationSet, tol_rel: float = 1e-10, order: Optional[int] = None):
    """Close, partition, build, realify, decide the order and realize.

    Returns ``(system, pencil, decision)``; ``order`` overrides the
    numerical-rank decision.
    """
    closed = conjugate_close(data)
    left, right = partition(closed)
    pencil = realify(build_pencil(left, right))
    decision = numerical_order(pencil, tol_rel)
    r = decision.r if order is None else order
    r = min(max(r, 1), min(pencil.shape))
    return realize(pencil, r), pencil, decision
