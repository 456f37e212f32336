"""Loss families, corrected losses, and exact / rewritten / empirical risks.

The classification risk is the exact double sum of joint mass times loss.
A rewrite moves that sum onto the observed channels: corrected losses are
the loss vector times a decontamination matrix, and pairing them with the
observed channel masses reproduces the risk exactly.  Closed forms for the
corrected losses of each concrete scenario are kept alongside the generic
matrix product as an independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from .core import FiniteJoint, Marginals, marginals as compute_marginals
from .decontam import DecontaminationResult, decontaminate, invert_square
from .errors import (
    EmptyChannel,
    NonDifferentiableLoss,
    NonFiniteScore,
    ShapeMismatch,
    SpecMismatch,
    UnsupportedScenario,
    ZeroConfidence,
)
from .scenarios import (
    FAMILY_CCN,
    FAMILY_MCD,
    FAMILY_SCONF,
    CCN,
    CL,
    GCCN,
    MCD,
    MCL,
    PCPL,
    PPL,
    Pconf,
    SCConf,
    Soft,
    SubConf,
    UU,
    ScenarioSpec,
    compound_label_space,
    observed_distribution,
    specs_equal,
)

LOSS_NAMES = ("zero-one", "logistic", "squared")


@dataclass(frozen=True)
class LossSpec:
    """A per-class loss family over score vectors g(x) in R^K.

    zero-one: miss/hit of the argmax (lowest index wins ties);
    logistic: one-vs-all sum, softplus(-g_k) plus softplus(g_j) over j != k;
    squared: squared distance of the scores to the one-hot target.
    """
    name: str

    differentiable: ClassVar[dict] = {"zero-one": False, "logistic": True, "squared": True}

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise UnsupportedScenario(f"unknown loss {self.name!r}; choose from {LOSS_NAMES}")

    @property
    def is_differentiable(self) -> bool:
        return self.differentiable[self.name]


def _check_scores(scores: np.ndarray) -> np.ndarray:
    g = np.asarray(scores, dtype=np.float64)
    if g.ndim != 1:
        raise ShapeMismatch(f"scores must be a K-vector, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise NonFiniteScore("scores contain NaN or infinity")
    return g


def _softplus(x: np.ndarray) -> np.ndarray:
    # Overflow deliberately propagates to +inf; training reports it as Diverged.
    with np.errstate(over="ignore"):
        return np.log1p(np.exp(x))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loss_vector(ls: LossSpec, scores) -> np.ndarray:
    """K-vector with entry k equal to the loss when the true class is k+1."""
    g = _check_scores(scores)
    K = g.shape[0]
    if ls.name == "zero-one":
        out = np.ones(K)
        out[int(np.argmax(g))] = 0.0
        return out
    if ls.name == "logistic":
        with np.errstate(invalid="ignore"):  # inf - inf on overflowed scores
            sp, sm = _softplus(g), _softplus(-g)
            return sp.sum() - sp + sm
    base = float(g @ g)
    return base - 2.0 * g + 1.0


def loss_score_slope(ls: LossSpec, scores) -> tuple:
    """Common structure of the loss gradients: the gradient of entry k is
    base(g) - scale * e_k.  Returns (base, scale)."""
    g = _check_scores(scores)
    if not ls.is_differentiable:
        raise NonDifferentiableLoss("zero-one loss has no gradient")
    if ls.name == "logistic":
        return _sigmoid(g), 1.0
    return 2.0 * g, 2.0


def loss_gradients(ls: LossSpec, scores) -> np.ndarray:
    """(K, K) matrix whose row k is the gradient of loss entry k in the scores."""
    base, scale = loss_score_slope(ls, scores)
    K = base.shape[0]
    return np.tile(base, (K, 1)) - scale * np.eye(K)


def score_matrix(model, j: FiniteJoint) -> np.ndarray:
    """(n_x, K) scores of a linear model on every instance."""
    return j.features @ np.asarray(model.weights).T + np.asarray(model.bias)


def loss_matrix(ls: LossSpec, model, j: FiniteJoint) -> np.ndarray:
    """(K, n_x) table of per-class losses at every instance."""
    scores = score_matrix(model, j)
    return np.stack([loss_vector(ls, scores[i]) for i in range(j.n_x)], axis=1)


# ---------------------------------------------------------------------------
# Exact risks
# ---------------------------------------------------------------------------

def classification_risk(j: FiniteJoint, model, ls: LossSpec) -> float:
    """Exact risk: the double sum of joint mass times per-class loss."""
    return float(np.sum(j.joint * loss_matrix(ls, model, j)))


def corrected_losses(L: np.ndarray, dr: DecontaminationResult, i: int) -> np.ndarray:
    """Row product of the loss vector with the decontamination matrix at x_i."""
    if dr.matrices is None:
        raise ShapeMismatch("pairwise decontamination has no per-instance matrix; use the pair path")
    mat = dr.matrices[i]
    L = np.asarray(L, dtype=np.float64)
    if L.shape[0] != mat.shape[0]:
        raise ShapeMismatch(f"loss vector has {L.shape[0]} entries, matrix expects {mat.shape[0]}")
    return L @ mat


def rewritten_risk(spec: ScenarioSpec, j: FiniteJoint, model, ls: LossSpec,
                   method: str = "auto", sconf_form: str = "symmetric") -> float:
    """Risk recomputed from the observed channels and corrected losses.

    Equals :func:`classification_risk` whenever decontamination succeeded.
    Sconf uses the pair double sum; ``sconf_form`` selects the symmetrized
    pair losses (default) or the first-argument form, which integrate to the
    same value.
    """
    lam = loss_matrix(ls, model, j)
    if spec.family == FAMILY_SCONF:
        return _sconf_rewritten_risk(spec, j, lam, sconf_form)
    cm = observed_distribution(spec, j)
    dr = decontaminate(spec, j, method=method)
    total = 0.0
    for i in range(j.n_x):
        total += float(corrected_losses(lam[:, i], dr, i) @ cm.observed[i])
    return total


def _sconf_rewritten_risk(spec, j, lam, form: str) -> float:
    cm = observed_distribution(spec, j)
    m = compute_marginals(j)
    pi_p, pi_n = float(m.priors[0]), float(m.priors[1])
    r = cm.pair_confidence
    wp = (r - pi_n) / (pi_p - pi_n)
    wn = (pi_p - r) / (pi_p - pi_n)
    lp, ln = lam[0], lam[1]
    if form == "x-only":
        per_pair = wp * lp[:, None] + wn * ln[:, None]
    elif form == "symmetric":
        per_pair = (wp * (lp[:, None] + lp[None, :]) + wn * (ln[:, None] + ln[None, :])) / 2.0
    else:
        raise UnsupportedScenario(f"unknown Sconf form {form!r}")
    return float(np.sum(cm.pair.matrix * per_pair))


# ---------------------------------------------------------------------------
# Closed-form corrected losses (cross-check against the generic product)
# ---------------------------------------------------------------------------

def closed_form_corrected_loss(spec: ScenarioSpec, m: Marginals, i: int, L,
                               i2: Optional[int] = None) -> np.ndarray:
    """Hand-coded corrected losses per scenario.

    Matches the generic ``corrected_losses`` entrywise, except CL and MCL
    where this returns the inversion-based weights (the marginal-chain ones
    legitimately differ entry by entry while giving the same risk).  Sconf
    is pair-shaped and needs ``i2``.
    """
    L = np.asarray(L, dtype=np.float64)
    K = m.K
    if spec.family == FAMILY_MCD or spec.family == FAMILY_SCONF:
        pi_p, pi_n = float(m.priors[0]), float(m.priors[1])
        lp, ln = float(L[0]), float(L[1])
        s2 = pi_p * pi_p + pi_n * pi_n
        if isinstance(spec, (UU, MCD)):
            g1 = spec.gamma_1 if isinstance(spec, UU) else spec.gamma_p
            g2 = spec.gamma_2 if isinstance(spec, UU) else spec.gamma_n
            den = 1.0 - g1 - g2
            return np.array([((1.0 - g2) * pi_p * lp - g2 * pi_n * ln) / den,
                             (-g1 * pi_p * lp + (1.0 - g1) * pi_n * ln) / den])
        if spec.name == "PU":
            return np.array([pi_p * lp - pi_p * ln, ln])
        if spec.name == "SU":
            den = 2.0 * pi_p - 1.0
            return np.array([s2 * (lp - ln) / den, (-pi_n * lp + pi_p * ln) / den])
        if spec.name == "DU":
            den = pi_n - pi_p
            return np.array([2.0 * pi_p * pi_n * (lp - ln) / den,
                             (-pi_p * lp + pi_n * ln) / den])
        if spec.name == "SD":
            den = pi_p - pi_n
            return np.array([s2 * (pi_p * lp - pi_n * ln) / den,
                             2.0 * pi_p * pi_n * (-pi_n * lp + pi_p * ln) / den])
        if spec.name == "Pcomp":
            return np.array([lp - pi_p * ln, -pi_n * lp + ln])
        # Sconf
        if i2 is None:
            raise ShapeMismatch("Sconf closed form needs the pair partner index i2")
        from .scenarios import _sconf_confidence_from_marginals
        r = _sconf_confidence_from_marginals(m, i, i2)
        return np.array([(r - pi_n) / (pi_p - pi_n) * lp, (pi_p - r) / (pi_p - pi_n) * ln])

    if spec.family == FAMILY_CCN:
        if isinstance(spec, CL):
            return L.sum() - (K - 1) * L
        if isinstance(spec, MCL):
            space = compound_label_space(K)
            out = np.empty(len(space))
            for jdx, sbar in enumerate(space):
                d = len(sbar)
                inside = sum(L[c - 1] for c in sbar)
                out[jdx] = (L.sum() - inside) - (K - 1 - d) / d * inside
            return out
        if isinstance(spec, (PPL, PCPL)):
            space = compound_label_space(K)
            r = m.class_probabilities[:, i]
            out = np.zeros(len(space))
            for jdx, s in enumerate(space):
                idx = [c - 1 for c in s]
                den = float(r[idx].sum())
                if den > 0.0:
                    out[jdx] = float((r[idx] * L[idx]).sum() / den)
            return out
        raise UnsupportedScenario(f"no closed form for {spec.name}")

    # confidence family
    r = m.class_probabilities[:, i]
    if isinstance(spec, SubConf):
        den = float(sum(r[c - 1] for c in spec.Y_s))
    elif isinstance(spec, SCConf):
        den = float(r[spec.y_s - 1])
    elif isinstance(spec, Pconf):
        den = float(r[0])
    elif isinstance(spec, Soft):
        den = 1.0
    else:
        raise UnsupportedScenario(f"no closed form for {spec.name}")
    if den <= 0.0:
        raise ZeroConfidence(f"super-class probability is zero at instance {i}")
    return (r / den) * L


# ---------------------------------------------------------------------------
# Empirical estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChannelTerms:
    """Flattened per-channel estimator terms.

    Each entry e contributes weights[e] . loss(g(x_idx[e])) to draw draw[e];
    the channel's estimate is the mean over its n_draws draw totals, and the
    full estimator is the sum of the channel estimates.
    """
    label: str
    n_draws: int
    idx: np.ndarray       # (n_entries,)
    weights: np.ndarray   # (n_entries, K)
    draw: np.ndarray      # (n_entries,)


def _mixture_decontamination(spec, m: Marginals) -> np.ndarray:
    from .scenarios import _mixture_matrix, transform_matrix
    a = _mixture_matrix(spec, m) @ transform_matrix(spec, m, 0)
    return invert_square(a)


def _point_terms(label, indices, col) -> ChannelTerms:
    n = len(indices)
    return ChannelTerms(label, n, np.asarray(indices, dtype=int),
                        np.tile(col, (n, 1)), np.arange(n))


def _pair_half_terms(label, pairs, col) -> ChannelTerms:
    pairs = np.asarray(pairs, dtype=int)
    n = pairs.shape[0]
    idx = np.concatenate([pairs[:, 0], pairs[:, 1]])
    w = np.tile(col / 2.0, (2 * n, 1))
    return ChannelTerms(label, n, idx, w, np.concatenate([np.arange(n), np.arange(n)]))


def channel_terms(ds, spec: ScenarioSpec, j: FiniteJoint) -> list:
    """Estimator terms for every channel of a weak dataset.

    The weights already fold in channel masses (reciprocal priors for the
    mixture family, the super-class prior for confidence data), so the risk
    estimate is simply the sum over channels of per-channel means.
    """
    if not specs_equal(ds.spec, spec):
        raise SpecMismatch(f"dataset was generated for {ds.spec.name}, not {spec.name}")
    m = compute_marginals(j)
    by_label = {c.label: c for c in ds.channels}

    if spec.family == FAMILY_MCD:
        dag = _mixture_decontamination(spec, m)
        col0, col1 = dag[:, 0], dag[:, 1]
        if spec.name in ("MCD", "UU", "PU"):
            a, b = ds.channels
            return [_point_terms(a.label, a.indices, col0),
                    _point_terms(b.label, b.indices, col1)]
        if spec.name in ("SU", "DU"):
            pair_ch, point_ch = by_label[spec.name[0]], by_label["U"]
            return [_pair_half_terms(pair_ch.label, pair_ch.pairs, col0),
                    _point_terms(point_ch.label, point_ch.indices, col1)]
        if spec.name == "SD":
            return [_pair_half_terms("S", by_label["S"].pairs, col0),
                    _pair_half_terms("D", by_label["D"].pairs, col1)]
        # Pcomp: the first element of each pair is a Sup draw, the second an Inf draw
        pc = by_label["PC"]
        pairs = np.asarray(pc.pairs, dtype=int)
        n = pairs.shape[0]
        idx = np.concatenate([pairs[:, 0], pairs[:, 1]])
        w = np.vstack([np.tile(col0, (n, 1)), np.tile(col1, (n, 1))])
        return [ChannelTerms("PC", n, idx, w, np.concatenate([np.arange(n), np.arange(n)]))]

    if spec.family == FAMILY_SCONF:
        ch = ds.channels[0]
        pairs = np.asarray(ch.pairs, dtype=int)
        r = np.asarray(ch.confidences, dtype=np.float64)
        pi_p, pi_n = float(m.priors[0]), float(m.priors[1])
        wp = (r - pi_n) / (pi_p - pi_n) / 2.0
        wn = (pi_p - r) / (pi_p - pi_n) / 2.0
        n = pairs.shape[0]
        w = np.stack([wp, wn], axis=1)
        return [ChannelTerms(ch.label, n, np.concatenate([pairs[:, 0], pairs[:, 1]]),
                             np.vstack([w, w]), np.concatenate([np.arange(n), np.arange(n)]))]

    if spec.family == FAMILY_CCN:
        return [_ccn_stream_terms(ds, spec, j, m)]

    # confidence family: one channel of instances with attached confidences
    ch = ds.channels[0]
    idx = np.asarray(ch.indices, dtype=int)
    conf = np.asarray(ch.confidences, dtype=np.float64)
    if idx.size == 0:
        return [ChannelTerms(ch.label, 0, idx, np.zeros((0, m.K)), np.zeros(0, dtype=int))]
    if isinstance(spec, SubConf):
        coeff = float(sum(m.priors[c - 1] for c in spec.Y_s))
        den = conf[:, [c - 1 for c in spec.Y_s]].sum(axis=1)
    elif isinstance(spec, SCConf):
        coeff = float(m.priors[spec.y_s - 1])
        den = conf[:, spec.y_s - 1]
    elif isinstance(spec, Pconf):
        coeff = float(m.priors[0])
        den = conf[:, 0]
    else:  # Soft
        coeff = 1.0
        den = np.ones(len(idx))
    if np.any(den <= 0.0):
        raise ZeroConfidence("a sampled instance has zero super-class confidence")
    w = coeff * conf / den[:, None]
    return [ChannelTerms(ch.label, len(idx), idx, w, np.arange(len(idx)))]


def _ccn_stream_terms(ds, spec, j: FiniteJoint, m: Marginals) -> ChannelTerms:
    """One logical stream over all compound-label channels.

    Weight columns follow the family defaults: the closed inversion weights
    for CL and MCL (the literature estimators), confidence ratios for
    partial labels, and the marginal-chain columns for CCN and GCCN.
    """
    K = j.K
    space = compound_label_space(K)
    need_model = isinstance(spec, (CCN, GCCN))
    cmodel = observed_distribution(spec, j) if need_model else None

    idx_parts, w_parts = [], []
    for c, ch in enumerate(ds.channels):
        arr = np.asarray(ch.indices, dtype=int)
        if arr.size == 0:
            continue
        if isinstance(spec, CL):
            w = np.ones(K)
            w[c] -= K - 1
            w_parts.append(np.tile(w, (arr.size, 1)))
        elif isinstance(spec, MCL):
            sbar = space[c]
            d = len(sbar)
            w = np.ones(K)
            for cls in sbar:
                w[cls - 1] = 1.0 - (K - 1) / d
            w_parts.append(np.tile(w, (arr.size, 1)))
        elif isinstance(spec, (PPL, PCPL)):
            members = [cls - 1 for cls in space[c]]
            r = m.class_probabilities[:, arr]
            den = r[members, :].sum(axis=0)
            w = np.zeros((arr.size, K))
            w[:, members] = (r[members, :] / den[None, :]).T
            w_parts.append(w)
        else:  # CCN / GCCN: marginal-chain column at each drawn instance
            mats = cmodel.matrix[arr, c, :]           # (n, K)
            masses = cmodel.observed[arr, c]          # (n,)
            w_parts.append(mats * j.joint[:, arr].T / masses[:, None])
        idx_parts.append(arr)

    if not idx_parts:
        raise EmptyChannel("dataset has no draws in any label channel")
    idx = np.concatenate(idx_parts)
    w = np.vstack(w_parts)
    return ChannelTerms("SX", idx.size, idx, w, np.arange(idx.size))


def per_draw_values(terms: ChannelTerms, lam: np.ndarray) -> np.ndarray:
    """Draw totals of a channel given the (K, n_x) loss table."""
    contrib = np.einsum("ek,ke->e", terms.weights, lam[:, terms.idx])
    vals = np.zeros(terms.n_draws)
    np.add.at(vals, terms.draw, contrib)
    return vals


def empirical_risk(ds, spec: ScenarioSpec, model, ls: LossSpec, j: FiniteJoint) -> float:
    """Sample estimate of the risk from a weak dataset.

    Raises EmptyChannel when a channel that enters as a mean has no draws,
    SpecMismatch when the dataset belongs to another scenario.
    """
    lam = loss_matrix(ls, model, j)
    total = 0.0
    for terms in channel_terms(ds, spec, j):
        if terms.n_draws == 0:
            raise EmptyChannel(f"channel {terms.label!r} has no samples")
        total += float(per_draw_values(terms, lam).mean())
    return total
