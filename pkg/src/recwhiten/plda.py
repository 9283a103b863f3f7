"""Two-covariance PLDA: scatter-based training and log-likelihood-ratio scoring.

The model is the pair (AC, WC): across-class covariance of speaker means and
within-class covariance of sessions about their speaker mean. A trial is
scored as the log ratio of the joint Gaussian density of the (enroll, test)
pair under the same-speaker versus different-speaker hypotheses.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .data import DataError, ScoredTrial, ScoreSet, TrialList, VectorSet
from .stats import COV_FLOOR, cholesky_lower
from .whitening import length_normalize


@dataclass
class PldaModel:
    mean: np.ndarray
    ac: np.ndarray  # across-class covariance, PSD
    wc: np.ndarray  # within-class covariance, SPD
    rank: int | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.ac = np.asarray(self.ac, dtype=float)
        self.wc = np.asarray(self.wc, dtype=float)
        d = self.mean.shape[0]
        for name, m in (("ac", self.ac), ("wc", self.wc)):
            if m.shape != (d, d):
                raise ValueError(f"{name} shape {m.shape} does not match dim {d}")
            scale = max(np.abs(m).max(), 1.0)
            if np.abs(m - m.T).max() > 1e-12 * scale:
                raise ValueError(f"{name} not symmetric")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def train_plda(data: VectorSet, rank: int | None = None) -> PldaModel:
    """Estimate mean, WC and AC from speaker-labeled vectors.

    WC is the pooled within-speaker scatter over N - S degrees of freedom
    (floored by 1e-8 I); AC the scatter of the S speaker means about the
    global mean over S - 1. With rank R set, AC is truncated to its top-R
    eigenpairs.
    """
    by_spk: dict[str, list[np.ndarray]] = defaultdict(list)
    for e in data.entries:
        if e.speaker_id is None:
            raise DataError(f"entry {e.id!r} has no speaker label")
        by_spk[e.speaker_id].append(e.values)
    n_spk = len(by_spk)
    n_total = len(data)
    if n_spk < 2:
        raise DataError(f"need at least 2 speakers, got {n_spk}")
    if n_total - n_spk < 1:
        raise DataError("need at least one extra session beyond one per speaker")
    d = data.dim

    x = data.matrix()
    mean = x.mean(axis=0)
    within = np.zeros((d, d))
    spk_means = []
    for vecs in by_spk.values():
        m = np.stack(vecs)
        mu = m.mean(axis=0)
        spk_means.append(mu)
        xc = m - mu
        within += xc.T @ xc
    wc = within / (n_total - n_spk) + COV_FLOOR * np.eye(d)
    wc = 0.5 * (wc + wc.T)

    sm = np.stack(spk_means) - mean
    ac = (sm.T @ sm) / (n_spk - 1)
    ac = 0.5 * (ac + ac.T)
    if rank is not None:
        if not 1 <= rank <= d:
            raise ValueError(f"rank must be in [1, {d}], got {rank}")
        vals, vecs = np.linalg.eigh(ac)
        keep = np.argsort(vals)[::-1][:rank]
        vals_r = np.clip(vals[keep], 0.0, None)
        v = vecs[:, keep]
        ac = v @ np.diag(vals_r) @ v.T
        ac = 0.5 * (ac + ac.T)
    return PldaModel(mean, ac, wc, rank)


def _scoring_terms(model: PldaModel):
    """Precompute the bilinear form of the two-covariance LLR.

    With T = AC + WC and u, v the centered pair,
        LLR = const - 0.5 (u^T G u + v^T G v + 2 u^T Q v)
    where [[P, Q], [Q, P]] is the inverse of [[T, AC], [AC, T]] and
    G = P - T^-1.
    """
    t = model.ac + model.wc
    d = model.dim
    chol_t = cholesky_lower(t)
    t_inv = np.linalg.solve(chol_t.T, np.linalg.solve(chol_t, np.eye(d)))
    schur = t - model.ac @ t_inv @ model.ac
    schur = 0.5 * (schur + schur.T)
    chol_s = cholesky_lower(schur)
    p = np.linalg.solve(chol_s.T, np.linalg.solve(chol_s, np.eye(d)))
    q = -t_inv @ model.ac @ p
    q = 0.5 * (q + q.T)
    logdet_t = 2.0 * np.sum(np.log(np.diag(chol_t)))
    logdet_s = 2.0 * np.sum(np.log(np.diag(chol_s)))
    const = -0.5 * (logdet_s - logdet_t)
    g = p - t_inv
    return g, q, const


def score_pair(model: PldaModel, enroll: np.ndarray, test: np.ndarray) -> float:
    """LLR of (enroll, test) being same-speaker versus different-speaker."""
    e = np.asarray(enroll, dtype=float) - model.mean
    t = np.asarray(test, dtype=float) - model.mean
    if e.shape != (model.dim,) or t.shape != (model.dim,):
        raise ValueError("dimension mismatch")
    g, q, const = _scoring_terms(model)
    # cross term written as a commutative sum so swapping the pair is exact
    cross = (e @ q) @ t + (t @ q) @ e
    return float(const - 0.5 * (e @ g @ e + t @ g @ t + cross))


def score_matrix(model: PldaModel, enroll: np.ndarray, test: np.ndarray) -> np.ndarray:
    """All-pairs LLR matrix between the rows of two vector stacks."""
    e = np.asarray(enroll, dtype=float) - model.mean
    t = np.asarray(test, dtype=float) - model.mean
    g, q, const = _scoring_terms(model)
    eg = np.einsum("ij,jk,ik->i", e, g, e)
    tg = np.einsum("ij,jk,ik->i", t, g, t)
    cross = (e @ q) @ t.T + ((t @ q) @ e.T).T
    return const - 0.5 * (eg[:, None] + tg[None, :] + cross)


def enroll_models(enroll: VectorSet) -> tuple[list[str], np.ndarray]:
    """Average each speaker's sessions and re-length-normalize into one
    model vector; entries without a speaker label enroll under their own id."""
    by_model: dict[str, list[np.ndarray]] = defaultdict(list)
    order: list[str] = []
    for e in enroll.entries:
        key = e.speaker_id if e.speaker_id is not None else e.id
        if key not in by_model:
            order.append(key)
        by_model[key].append(e.values)
    vecs = []
    for key in order:
        avg = np.stack(by_model[key]).mean(axis=0)
        try:
            vecs.append(length_normalize(avg))
        except ArithmeticError:
            raise DataError(f"zero-norm enrollment model {key!r}")
    return order, np.stack(vecs)


def score_trials(model: PldaModel, enroll: VectorSet, test: VectorSet,
                 trials: TrialList) -> ScoreSet:
    """Score a trial list; multi-session enrollments are averaged first."""
    model_ids, model_vecs = enroll_models(enroll)
    model_idx = {mid: i for i, mid in enumerate(model_ids)}
    test_map = test.by_id()
    test_ids = list(test_map)
    test_idx = {tid: i for i, tid in enumerate(test_ids)}
    for t in trials.trials:
        if t.enroll_model_id not in model_idx:
            raise DataError(f"unresolved enrollment model {t.enroll_model_id!r}")
        if t.test_id not in test_idx:
            raise DataError(f"unresolved test id {t.test_id!r}")
    test_vecs = np.stack([test_map[tid].values for tid in test_ids])
    llr = score_matrix(model, model_vecs, test_vecs)
    scored = [
        ScoredTrial(t.enroll_model_id, t.test_id,
                    float(llr[model_idx[t.enroll_model_id], test_idx[t.test_id]]),
                    t.label)
        for t in trials.trials
    ]
    return ScoreSet(scored)


# --- serialization ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_plda(model: PldaModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[mean]\n" + " ".join(_fmt(v) for v in model.mean) + "\n")
        fh.write("[ac]\n")
        for row in model.ac:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
        fh.write("[wc]\n")
        for row in model.wc:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
        fh.write("[rank]\n")
        fh.write(("-" if model.rank is None else str(model.rank)) + "\n")


def load_plda(path) -> PldaModel:
    blocks: dict[str, list[str]] = {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("["):
                current = line.strip("[]")
                blocks[current] = []
            elif current is None:
                raise DataError("data before first block header")
            else:
                blocks[current].append(line)
    for key in ("mean", "ac", "wc", "rank"):
        if key not in blocks:
            raise DataError(f"missing [{key}] block")
    mean = np.array([float(v) for v in blocks["mean"][0].split()])
    ac = np.stack([np.array([float(v) for v in r.split()]) for r in blocks["ac"]])
    wc = np.stack([np.array([float(v) for v in r.split()]) for r in blocks["wc"]])
    rank_txt = blocks["rank"][0].strip()
    rank = None if rank_txt == "-" else int(rank_txt)
    return PldaModel(mean, ac, wc, rank)
