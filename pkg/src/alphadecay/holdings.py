"""Holdings-convergence analytics: synthetic 13F-shaped panels, cosine
similarity indices, and observable homogeneity estimators.

Panels are institutions x assets x quarters weight arrays; each
institution-quarter row is a portfolio (nonnegative, summing to one).
Weights are stored sparse per quarter since real filings are mostly
zeros over a large asset universe.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .closedform import DomainError
from .seeding import generator

AI_LABEL = "AI"
NON_AI_LABEL = "NON_AI"


class CalibrationError(RuntimeError):
    """Panel generator could not hit the requested similarity targets."""


@dataclass
class HoldingsPanel:
    """Quarterly institutional portfolio weights with group labels."""

    quarters: list
    labels: list           # per institution: AI_LABEL or NON_AI_LABEL
    weights: list = field(repr=False)  # per quarter: csr_matrix (inst x assets)

    def __post_init__(self) -> None:
        n = len(self.labels)
        for q, w in zip(self.quarters, self.weights):
            if w.shape[0] != n:
                raise DomainError(f"quarter {q}: {w.shape[0]} rows for {n} institutions")
            sums = np.asarray(w.sum(axis=1)).ravel()
            if not np.allclose(sums, 1.0, atol=1e-9):
                raise DomainError(f"quarter {q}: rows must sum to 1")
            if w.min() < 0:
                raise DomainError(f"quarter {q}: negative weights")

    @property
    def n_institutions(self) -> int:
        return len(self.labels)

    @property
    def n_assets(self) -> int:
        return self.weights[0].shape[1]

    def ai_mask(self) -> np.ndarray:
        return np.array([lab == AI_LABEL for lab in self.labels])

    def quarter_index(self, quarter) -> int:
        return self.quarters.index(quarter)

    def dense(self, q_idx: int) -> np.ndarray:
        return np.asarray(self.weights[q_idx].todense())

    def to_csv(self, path) -> None:
        """Long format: institution, quarter, asset, weight (nonzero only)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["institution", "quarter", "asset", "weight"])
            for q_idx, quarter in enumerate(self.quarters):
                mat = self.weights[q_idx].tocoo()
                for i, j, val in zip(mat.row, mat.col, mat.data):
                    w.writerow([i, quarter, j, repr(float(val))])

    @classmethod
    def from_csv(cls, path, labels: Sequence[str]) -> "HoldingsPanel":
        rows = []
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            for rec in r:
                rows.append((int(rec["institution"]), rec["quarter"],
                             int(rec["asset"]), float(rec["weight"])))
        quarters = sorted({r[1] for r in rows})
        n = len(labels)
        n_assets = max(r[2] for r in rows) + 1
        mats = []
        for q in quarters:
            sel = [r for r in rows if r[1] == q]
            mat = sparse.coo_matrix(
                ([r[3] for r in sel], ([r[0] for r in sel], [r[2] for r in sel])),
                shape=(n, n_assets),
            ).tocsr()
            mats.append(mat)
        return cls(quarters=quarters, labels=list(labels), weights=mats)


@dataclass(frozen=True)
class ConvergenceSeries:
    quarters: list
    aggregate: np.ndarray
    ai_ai: np.ndarray
    nonai_nonai: np.ndarray
    cross: np.ndarray
    pair_counts: dict

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quarter", "s_bar", "s_ai_ai", "s_nonai_nonai", "s_cross"])
            for i, q in enumerate(self.quarters):
                w.writerow([q, repr(float(self.aggregate[i])), repr(float(self.ai_ai[i])),
                            repr(float(self.nonai_nonai[i])), repr(float(self.cross[i]))])


def cosine_similarity(w_i: np.ndarray, w_j: np.ndarray) -> float:
    """Cosine of two weight vectors; in [0, 1] for holdings."""
    ni = float(np.linalg.norm(w_i))
    nj = float(np.linalg.norm(w_j))
    if ni == 0.0 or nj == 0.0:
        raise DomainError("cosine similarity undefined for zero vectors")
    return float(np.dot(w_i, w_j) / (ni * nj))


def _pairwise_mean(mat: sparse.csr_matrix, rows: np.ndarray) -> tuple[float, int]:
    """Mean pairwise cosine among the selected rows (upper triangle)."""
    sub = mat[rows]
    norms = np.sqrt(np.asarray(sub.multiply(sub).sum(axis=1)).ravel())
    if np.any(norms == 0.0):
        raise DomainError("zero weight vector in similarity computation")
    normed = sparse.diags(1.0 / norms) @ sub
    gram = (normed @ normed.T).toarray()
    n = gram.shape[0]
    if n < 2:
        raise DomainError("need at least 2 institutions")
    iu = np.triu_indices(n, k=1)
    return float(gram[iu].mean()), len(iu[0])


def _cross_mean(mat: sparse.csr_matrix, rows_a: np.ndarray, rows_b: np.ndarray) -> tuple[float, int]:
    sub_a, sub_b = mat[rows_a], mat[rows_b]
    na = np.sqrt(np.asarray(sub_a.multiply(sub_a).sum(axis=1)).ravel())
    nb = np.sqrt(np.asarray(sub_b.multiply(sub_b).sum(axis=1)).ravel())
    gram = (sparse.diags(1.0 / na) @ sub_a) @ (sparse.diags(1.0 / nb) @ sub_b).T
    g = gram.toarray()
    return float(g.mean()), g.size


def convergence_index(panel: HoldingsPanel, quarter, group: Optional[str] = None) -> tuple[float, int]:
    """Mean pairwise cosine similarity within a quarter.

    group None pools every institution; AI_LABEL / NON_AI_LABEL restrict
    to within-group pairs.
    """
    q = panel.quarter_index(quarter)
    if group is None:
        rows = np.arange(panel.n_institutions)
    else:
        rows = np.flatnonzero([lab == group for lab in panel.labels])
    if len(rows) < 2:
        raise DomainError("fewer than 2 institutions pass the filter")
    return _pairwise_mean(panel.weights[q], rows)


def convergence_series(panel: HoldingsPanel) -> ConvergenceSeries:
    ai = np.flatnonzero(panel.ai_mask())
    non = np.flatnonzero(~panel.ai_mask())
    agg, aai, nn, cross = [], [], [], []
    counts = {}
    for q_idx in range(len(panel.quarters)):
        mat = panel.weights[q_idx]
        v, counts["aggregate"] = _pairwise_mean(mat, np.arange(panel.n_institutions))
        agg.append(v)
        v, counts["ai_ai"] = _pairwise_mean(mat, ai)
        aai.append(v)
        v, counts["nonai_nonai"] = _pairwise_mean(mat, non)
        nn.append(v)
        v, counts["cross"] = _cross_mean(mat, ai, non)
        cross.append(v)
    return ConvergenceSeries(quarters=list(panel.quarters), aggregate=np.array(agg),
                             ai_ai=np.array(aai), nonai_nonai=np.array(nn),
                             cross=np.array(cross), pair_counts=counts)


DEFAULT_BREAKS = (21, 30, 40)  # 2018Q2, 2020Q3, 2023Q1 on a 2013Q1..2024Q4 axis


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=1, keepdims=True)


def _group_cosine(weights: np.ndarray) -> float:
    normed = weights / np.linalg.norm(weights, axis=1, keepdims=True)
    gram = normed @ normed.T
    iu = np.triu_indices(gram.shape[0], k=1)
    return float(gram[iu].mean())


def _calibrate_idio(target: float, f_common: np.ndarray, eps: np.ndarray,
                    total_var: float, tol: float = 2e-3) -> float:
    """Bisection on the idiosyncratic logit share so the realized group
    similarity hits the target: similarity falls monotonically as the
    idiosyncratic share grows."""
    lo, hi = 0.0, total_var
    w_lo = _softmax_rows(math.sqrt(total_var) * f_common[None, :] + 0.0 * eps)
    if _group_cosine(w_lo) < target:  # even pure common factor too dissimilar
        raise CalibrationError(f"similarity target {target} infeasible: too high")
    kappa_hi = 0.0
    w_hi = _softmax_rows(kappa_hi * f_common[None, :] + math.sqrt(total_var) * eps)
    if _group_cosine(w_hi) > target:
        raise CalibrationError(f"similarity target {target} infeasible: too low")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        kappa = math.sqrt(total_var - mid)
        w = _softmax_rows(kappa * f_common[None, :] + math.sqrt(mid) * eps)
        s = _group_cosine(w)
        if abs(s - target) < tol:
            return mid
        if s > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate_synthetic_13f(n_inst: int = 200, n_assets: int = 500, quarters: int = 48,
                           seed: int = 0, *, ai_share: float = 0.7,
                           s_start: float = 0.21, ai_end: float = 0.3318,
                           nonai_end: float = 0.25,
                           breaks: tuple = DEFAULT_BREAKS,
                           ar_persistence: float = 0.9,
                           total_logit_var: float = 2.0) -> HoldingsPanel:
    """Synthetic 13F-shaped panel calibrated to convergence targets.

    Weights are a softmax of kappa_g(t) * F + s_g(t) * eps, with F a fixed
    common asset factor and eps idiosyncratic AR(1) taste shocks. Holding
    the total logit variance fixed, raising the common loading raises
    within-group similarity, so each group's idiosyncratic share is
    calibrated by bisection on the realized similarity, quarter by
    quarter. Break quarters put step increases into the AI similarity
    path on top of its drift. Infeasible targets raise CalibrationError.
    """
    if n_inst < 4:
        raise DomainError("need at least 4 institutions")
    n_ai = int(round(ai_share * n_inst))
    if n_ai < 2 or n_inst - n_ai < 2:
        raise DomainError("both groups need at least 2 institutions")
    rng = generator(seed, "13f")

    # similarity paths: drift, plus AI step increases at the break quarters
    t_axis = np.linspace(0.0, 1.0, quarters)
    ai_path = s_start + (ai_end - s_start) * t_axis
    step = 0.25 * (ai_end - s_start)
    for b in breaks:
        if 0 < b < quarters:
            ai_path[b:] += step
    ai_path = s_start + (ai_path - s_start) * ((ai_end - s_start) / (ai_path[-1] - s_start))
    non_path = s_start + (nonai_end - s_start) * t_axis

    f_common = rng.normal(0.0, 1.0, size=n_assets)
    eps = rng.normal(0.0, 1.0, size=(n_inst, n_assets))
    mats = []
    labels = [AI_LABEL] * n_ai + [NON_AI_LABEL] * (n_inst - n_ai)
    for q in range(quarters):
        if q > 0:
            shock = rng.normal(0.0, 1.0, size=(n_inst, n_assets))
            eps = ar_persistence * eps + math.sqrt(1.0 - ar_persistence**2) * shock
        s_sq_ai = _calibrate_idio(float(ai_path[q]), f_common, eps[:n_ai], total_logit_var)
        s_sq_non = _calibrate_idio(float(non_path[q]), f_common, eps[n_ai:], total_logit_var)
        s_sq = np.where(np.arange(n_inst) < n_ai, s_sq_ai, s_sq_non)
        kappa = np.sqrt(total_logit_var - s_sq)
        logits = kappa[:, None] * f_common[None, :] + np.sqrt(s_sq)[:, None] * eps
        mats.append(sparse.csr_matrix(_softmax_rows(logits)))
    quarters_lbl = [f"Q{q}" for q in range(quarters)]
    return HoldingsPanel(quarters=quarters_lbl, labels=labels, weights=mats)


def planted_change_panel(rho: float, n_inst: int, n_assets: int, quarters: int,
                         seed: int, *, scale: float = 2e-4) -> HoldingsPanel:
    """Panel whose quarter-over-quarter weight changes share a planted
    common component: Delta_i = sqrt(rho) * G + sqrt(1-rho) * E_i. Used to
    verify that the observable homogeneity estimators recover rho."""
    if not 0.0 <= rho <= 1.0:
        raise DomainError("rho must be in [0,1]")
    rng = generator(seed, "planted")
    base = np.full((n_inst, n_assets), 1.0 / n_assets)
    mats = [sparse.csr_matrix(base)]
    w = base.copy()
    for _ in range(1, quarters):
        g = rng.normal(0.0, 1.0, size=n_assets)
        e = rng.normal(0.0, 1.0, size=(n_inst, n_assets))
        delta = scale * (math.sqrt(rho) * g[None, :] + math.sqrt(1.0 - rho) * e)
        delta -= delta.mean(axis=1, keepdims=True)  # keep rows summing to 1
        w = np.clip(w + delta, 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        mats.append(sparse.csr_matrix(w))
    labels = [AI_LABEL] * n_inst
    return HoldingsPanel(quarters=[f"Q{q}" for q in range(quarters)],
                         labels=labels, weights=mats)


def _weight_changes(panel: HoldingsPanel, quarter, group: Optional[str]) -> np.ndarray:
    q = panel.quarter_index(quarter)
    if q == 0:
        raise DomainError("need the preceding quarter to form weight changes")
    if group is None:
        rows = np.arange(panel.n_institutions)
    else:
        rows = np.flatnonzero([lab == group for lab in panel.labels])
    if len(rows) < 3:
        raise DomainError("need at least 3 institutions")
    now = np.asarray(panel.weights[q][rows].todense())
    prev = np.asarray(panel.weights[q - 1][rows].todense())
    return now - prev


def rho_pca(panel: HoldingsPanel, quarter, group: Optional[str] = AI_LABEL) -> float:
    """Fraction of the cross-sectional variance of quarterly weight changes
    explained by the first common factor (leading singular direction).

    The decomposition is uncentered across institutions: with homogeneous
    loadings the common factor IS the shared component of the changes,
    which centering would remove.
    """
    delta = _weight_changes(panel, quarter, group)
    total = float(np.sum(delta * delta))
    if total <= 0.0:
        raise DomainError("rank-deficient weight changes")
    svals = np.linalg.svd(delta, compute_uv=False)
    return float(svals[0] ** 2 / total)


def rho_sync(panel: HoldingsPanel, quarter, group: Optional[str] = AI_LABEL) -> float:
    """Trade-direction synchronicity: for each pair, the fraction of assets
    whose weight changes match in sign (zero changes excluded), averaged
    over assets then pairs, minus the 0.5 random-trading benchmark."""
    delta = _weight_changes(panel, quarter, group)
    signs = np.sign(delta)
    n = signs.shape[0]
    total = 0.0
    pairs = 0
    for i in range(n):
        for j in range(i + 1, n):
            valid = (signs[i] != 0) & (signs[j] != 0)
            m = int(valid.sum())
            if m == 0:
                continue
            total += float(np.mean(signs[i][valid] == signs[j][valid]))
            pairs += 1
    if pairs == 0:
        raise DomainError("no valid pairs with nonzero changes")
    return total / pairs - 0.5
