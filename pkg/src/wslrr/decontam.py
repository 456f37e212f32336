"""Decontamination matrices: inversion, marginal chain, and the special paths.

A decontamination matrix D(x) satisfies D(x) observed(x) = P(x).  Four
constructions are implemented:

* ``inversion``: D = (M M_trsf)^-1 for square invertible systems (the whole
  mixture family, and CL);
* ``marginal-chain``: D[k, j] = P(Y=k | S=s_j, x), defined for the label
  channel family without any invertibility assumption;
* ``mcl-blockwise``: the closed-form blockwise inverse of the
  multi-complementary matrix, one block per excluded-set size;
* ``sconf-special``: the per-pair diagonal built from the pair confidence.

Square systems are inverted with the 2x2 closed form or partial-pivot
elimination, never a library call, so results are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import FiniteJoint, Marginals, marginals as compute_marginals
from .errors import BadSize, DegenerateParams, NonSquare, Singular, WrongFamily, ZeroConfidence
from .scenarios import (
    FAMILY_CCN,
    FAMILY_CONF,
    FAMILY_MCD,
    FAMILY_SCONF,
    MCL,
    Pconf,
    SCConf,
    Soft,
    SubConf,
    ContaminationModel,
    ScenarioSpec,
    compound_label_space,
    contamination_matrix,
    observed_distribution,
    validate_spec,
    _sconf_confidence_from_marginals,
    _sconf_denominators,
)

SINGULAR_TOL = 1e-12

METHOD_INVERSION = "inversion"
METHOD_MARGINAL_CHAIN = "marginal-chain"
METHOD_SCONF = "sconf-special"
METHOD_MCL_BLOCKWISE = "mcl-blockwise"
METHOD_DIAGONAL = "conf-diagonal"


@dataclass(frozen=True, eq=False)
class DecontaminationResult:
    """Per-instance decontamination matrices.

    ``matrices[i]`` is the K x m matrix at x_i; for the sconf-special method
    ``pair_matrices[i, i2]`` holds the per-pair 2x2 diagonal instead.
    """
    spec: ScenarioSpec
    method: str
    matrices: Optional[np.ndarray] = None       # (n_x, K, m)
    pair_matrices: Optional[np.ndarray] = None  # (n_x, n_x, 2, 2)


def invert_square(a: np.ndarray) -> np.ndarray:
    """Deterministic inverse: closed form for 2x2, partial-pivot Gauss-Jordan
    otherwise.  Raises Singular when the row-scaled determinant is below
    SINGULAR_TOL, NonSquare for non-square input."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"cannot invert a {a.shape} matrix")
    n = a.shape[0]
    scale = np.max(np.abs(a), axis=1)
    if np.any(scale == 0.0):
        raise Singular("matrix has an all-zero row")
    if n == 2:
        s = a / scale[:, None]
        if abs(s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]) <= SINGULAR_TOL:
            raise Singular("2x2 system is numerically singular")
        det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        return np.array([[a[1, 1], -a[0, 1]], [-a[1, 0], a[0, 0]]]) / det
    # Gauss-Jordan with partial pivoting on the row-scaled system
    work = a / scale[:, None]
    inv = np.eye(n) / scale[:, None]
    det_scaled = 1.0
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(work[col:, col])))
        if pivot != col:
            work[[col, pivot]] = work[[pivot, col]]
            inv[[col, pivot]] = inv[[pivot, col]]
            det_scaled = -det_scaled
        p = work[col, col]
        det_scaled *= p
        if abs(p) <= SINGULAR_TOL:
            raise Singular(f"pivot {abs(p):.3e} below threshold at column {col}")
        work[col] /= p
        inv[col] /= p
        for r in range(n):
            if r != col and work[r, col] != 0.0:
                f = work[r, col]
                work[r] -= f * work[col]
                inv[r] -= f * inv[col]
    if abs(det_scaled) <= SINGULAR_TOL:
        raise Singular(f"scaled determinant {abs(det_scaled):.3e} below threshold")
    return inv


def decontaminate_inversion(cm: ContaminationModel, i: int) -> np.ndarray:
    """(M(x_i) M_trsf(x_i))^-1; for the mixture family this equals the prior
    diagonal times the inverse contamination matrix."""
    if cm.family == FAMILY_SCONF:
        raise WrongFamily("Sconf does not go through the square inversion path")
    return invert_square(cm.matrix[i] @ cm.transform[i])


def decontaminate_marginal_chain(spec: ScenarioSpec, j: FiniteJoint, i: int) -> np.ndarray:
    """Column j holds P(Y=. | S=s_j, x_i); channels with zero mass at x_i get
    zero columns (they carry no probability, so reconstruction is unaffected)."""
    if spec.family != FAMILY_CCN:
        raise WrongFamily(f"marginal chain is defined for the label-channel family, not {spec.name}")
    m = compute_marginals(j)
    mat = contamination_matrix(spec, m, i)  # (m_ch, K)
    p = j.joint[:, i]
    masses = mat @ p
    out = np.zeros((j.K, mat.shape[0]))
    live = masses > 0.0
    out[:, live] = (mat[live, :] * p[None, :]).T / masses[live][None, :]
    return out


def mcl_block_inverse(K: int, d: int) -> np.ndarray:
    """K x N_d block inverse for excluded sets of size d.

    Entry (i, j) is 1 - ((K-1)/d) when class i+1 belongs to the j-th size-d
    set in canonical order, else 1.  Satisfies block_inverse @ block = I.
    """
    if not 1 <= d <= K - 1:
        raise BadSize(f"block size d={d} outside 1..{K - 1}")
    sets = [s for s in compound_label_space(K) if len(s) == d]
    out = np.ones((K, len(sets)))
    for jdx, s in enumerate(sets):
        for c in s:
            out[c - 1, jdx] = 1.0 - (K - 1) / d
    return out


def mcl_block(K: int, d: int) -> np.ndarray:
    """N_d x K forward block: row j is the uniform channel law of the j-th
    size-d excluded set, 1/binomial(K-1, d) on the classes outside it."""
    if not 1 <= d <= K - 1:
        raise BadSize(f"block size d={d} outside 1..{K - 1}")
    sets = [s for s in compound_label_space(K) if len(s) == d]
    out = np.empty((len(sets), K))
    w = 1.0 / math.comb(K - 1, d)
    for jdx, s in enumerate(sets):
        row = np.full(K, w)
        for c in s:
            row[c - 1] = 0.0
        out[jdx] = row
    return out


def mcl_inverse(spec: MCL, K: int) -> np.ndarray:
    """Horizontal concatenation of the blockwise inverses, aligned with the
    canonical channel order; left-inverts the size-scaled MCL matrix for any
    size law summing to one."""
    if not isinstance(spec, MCL):
        raise WrongFamily("blockwise inverse is specific to MCL")
    if len(spec.q) != K - 1:
        raise BadSize(f"MCL size law has {len(spec.q)} entries, expected {K - 1}")
    return np.hstack([mcl_block_inverse(K, d) for d in range(1, K)])


def sconf_decontamination(pi_p: float, r: float) -> np.ndarray:
    """Per-pair 2x2 diagonal diag((r - pi_n)/(pi_p - pi_n), (pi_p - r)/(pi_p - pi_n))."""
    if abs(pi_p - 0.5) <= 1e-9:
        raise DegenerateParams("Sconf requires the positive prior away from 1/2")
    pi_n = 1.0 - pi_p
    return np.diag([(r - pi_n) / (pi_p - pi_n), (pi_p - r) / (pi_p - pi_n)])


def conf_diagonal_inverse(spec: ScenarioSpec, m: Marginals, i: int) -> np.ndarray:
    """diag(r_k(x) / r_sel(x)) where r_sel is the super-class probability
    of the sampled classes (1 for Soft).  Raises ZeroConfidence when the
    super-class probability vanishes at x."""
    if spec.family != FAMILY_CONF:
        raise WrongFamily(f"{spec.name} is not a confidence scenario")
    r = m.class_probabilities[:, i]
    if isinstance(spec, SubConf):
        denom = float(sum(r[c - 1] for c in spec.Y_s))
    elif isinstance(spec, SCConf):
        denom = float(r[spec.y_s - 1])
    elif isinstance(spec, Pconf):
        denom = float(r[0])
    else:  # Soft
        denom = 1.0
    if denom <= 0.0:
        raise ZeroConfidence(f"super-class probability is zero at instance {i}")
    return np.diag(r / denom)


def default_method(spec: ScenarioSpec) -> str:
    if spec.family == FAMILY_MCD:
        return METHOD_INVERSION
    if spec.family == FAMILY_CCN:
        return METHOD_MARGINAL_CHAIN
    if spec.family == FAMILY_CONF:
        return METHOD_DIAGONAL
    return METHOD_SCONF


def decontaminate(spec: ScenarioSpec, j: FiniteJoint, method: str = "auto") -> DecontaminationResult:
    """Build per-instance decontamination matrices by the requested method.

    ``method`` is "inversion", "marginal-chain", "mcl-blockwise",
    "conf-diagonal", "sconf-special" or "auto" (family default).
    """
    m = compute_marginals(j)
    validate_spec(spec, m)
    if method == "auto":
        method = default_method(spec)

    if method == METHOD_SCONF:
        if spec.family != FAMILY_SCONF:
            raise WrongFamily(f"sconf-special only applies to Sconf, not {spec.name}")
        pi_p = float(m.priors[0])
        pairs = np.empty((j.n_x, j.n_x, 2, 2))
        for a in range(j.n_x):
            for b in range(j.n_x):
                r = _sconf_confidence_from_marginals(m, a, b)
                _sconf_denominators(m, r)
                pairs[a, b] = sconf_decontamination(pi_p, r)
        return DecontaminationResult(spec=spec, method=method, pair_matrices=pairs)

    if method == METHOD_MARGINAL_CHAIN:
        mats = np.stack([decontaminate_marginal_chain(spec, j, i) for i in range(j.n_x)])
        return DecontaminationResult(spec=spec, method=method, matrices=mats)

    if method == METHOD_MCL_BLOCKWISE:
        if not isinstance(spec, MCL):
            raise WrongFamily("mcl-blockwise requires an MCL spec")
        inv = mcl_inverse(spec, j.K)
        mats = np.broadcast_to(inv, (j.n_x,) + inv.shape).copy()
        return DecontaminationResult(spec=spec, method=method, matrices=mats)

    if method == METHOD_DIAGONAL:
        mats = np.stack([conf_diagonal_inverse(spec, m, i) for i in range(j.n_x)])
        return DecontaminationResult(spec=spec, method=method, matrices=mats)

    if method == METHOD_INVERSION:
        cm = observed_distribution(spec, j)
        if cm.family == FAMILY_SCONF:
            raise WrongFamily("use sconf-special for Sconf")
        mats = np.stack([decontaminate_inversion(cm, i) for i in range(j.n_x)])
        return DecontaminationResult(spec=spec, method=method, matrices=mats)

    raise WrongFamily(f"unknown decontamination method {method!r}")
