"""Detection metrics and score post-processing.

EER by linear interpolation between ROC vertices, normalized minimum and
actual detection cost at configurable operating points, symmetric score
normalization and fixed-weight fusion.

Threshold convention: a trial is accepted when score >= threshold, so ties
count as false accepts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DataError, ScoredTrial, ScoreSet


@dataclass(frozen=True)
class OperatingPoint:
    p_target: float
    c_miss: float = 1.0
    c_fa: float = 1.0
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.p_target < 1.0:
            raise ValueError(f"p_target must be in (0,1), got {self.p_target}")
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be positive")

    @property
    def normalizer(self) -> float:
        return min(self.c_miss * self.p_target, self.c_fa * (1.0 - self.p_target))

    @property
    def bayes_threshold(self) -> float:
        """Optimal fixed threshold for calibrated log-likelihood-ratio scores."""
        return float(np.log(self.c_fa * (1.0 - self.p_target) /
                            (self.c_miss * self.p_target)))


# SRE16-style defaults; configuration, not constants.
DEFAULT_OPERATING_POINTS = (
    OperatingPoint(p_target=0.01, name="dcf16-1"),
    OperatingPoint(p_target=0.005, name="dcf16-2"),
)


@dataclass
class EvalReport:
    eer: float
    min_dcf: dict[str, float]
    act_dcf: dict[str, float]
    c_primary: float
    n_target: int
    n_nontarget: int
    header: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [f"#{h}" for h in self.header]
        lines.append(f"eer\t{self.eer:.6f}")
        for name in self.min_dcf:
            key = name.replace("-", "_")
            lines.append(f"min_{key}\t{self.min_dcf[name]:.6f}")
        for name in self.act_dcf:
            key = name.replace("-", "_")
            lines.append(f"act_{key}\t{self.act_dcf[name]:.6f}")
        lines.append(f"c_primary\t{self.c_primary:.6f}")
        lines.append(f"n_target\t{self.n_target}")
        lines.append(f"n_nontarget\t{self.n_nontarget}")
        return "\n".join(lines) + "\n"


def _split_scores(sset: ScoreSet):
    tar = sset.score_array("target")
    non = sset.score_array("nontarget")
    if tar.size == 0 or non.size == 0:
        raise DataError("need at least one target and one nontarget trial")
    return tar, non


def _error_rates(tar: np.ndarray, non: np.ndarray, thresholds: np.ndarray):
    """P_miss and P_fa at each threshold: miss if target < t, accept if >= t."""
    p_miss = np.searchsorted(np.sort(tar), thresholds, side="left") / tar.size
    p_fa = 1.0 - np.searchsorted(np.sort(non), thresholds, side="left") / non.size
    return p_miss, p_fa


def _candidate_thresholds(tar: np.ndarray, non: np.ndarray) -> np.ndarray:
    scores = np.unique(np.concatenate([tar, non]))
    return np.concatenate([[scores[0] - 1.0], scores, [scores[-1] + 1.0]])


def compute_eer(sset: ScoreSet) -> float:
    """Equal error rate, linearly interpolated at the ROC crossing."""
    tar, non = _split_scores(sset)
    thr = _candidate_thresholds(tar, non)
    p_miss, p_fa = _error_rates(tar, non, thr)
    diff = p_miss - p_fa  # nondecreasing in the threshold
    idx = int(np.searchsorted(diff >= 0, True))
    if diff[idx] == 0.0:
        return float(p_miss[idx])
    d0, d1 = diff[idx - 1], diff[idx]
    t = -d0 / (d1 - d0)
    return float(p_miss[idx - 1] + t * (p_miss[idx] - p_miss[idx - 1]))


def _dcf(p_miss, p_fa, op: OperatingPoint):
    cost = op.c_miss * op.p_target * p_miss + op.c_fa * (1.0 - op.p_target) * p_fa
    return cost / op.normalizer


def compute_min_dcf(sset: ScoreSet, op: OperatingPoint) -> float:
    """Minimum normalized detection cost over every achievable threshold."""
    tar, non = _split_scores(sset)
    thr = _candidate_thresholds(tar, non)
    p_miss, p_fa = _error_rates(tar, non, thr)
    return float(np.min(_dcf(p_miss, p_fa, op)))


def compute_act_dcf(sset: ScoreSet, op: OperatingPoint,
                    threshold: float | None = None) -> float:
    """Normalized detection cost at a fixed threshold (Bayes threshold for
    LLR scores when none is given)."""
    tar, non = _split_scores(sset)
    if threshold is None:
        threshold = op.bayes_threshold
    thr = np.array([threshold])
    p_miss, p_fa = _error_rates(tar, non, thr)
    return float(_dcf(p_miss, p_fa, op)[0])


def evaluate(sset: ScoreSet, ops=DEFAULT_OPERATING_POINTS) -> EvalReport:
    """Full report: EER, per-point min/act DCF and their primary average."""
    ops = tuple(ops)
    if len(ops) != 2:
        raise ValueError(f"expected two operating points, got {len(ops)}")
    tar, non = _split_scores(sset)
    min_dcf = {op.name: compute_min_dcf(sset, op) for op in ops}
    act_dcf = {op.name: compute_act_dcf(sset, op) for op in ops}
    return EvalReport(
        eer=compute_eer(sset),
        min_dcf=min_dcf,
        act_dcf=act_dcf,
        c_primary=float(np.mean(list(min_dcf.values()))),
        n_target=int(tar.size),
        n_nontarget=int(non.size),
    )


def snorm(raw: ScoreSet, enroll_cohort: dict[str, np.ndarray],
          test_cohort: dict[str, np.ndarray]) -> ScoreSet:
    """Symmetric score normalization against cohort score statistics.

    s' = 0.5 * ((s - mu_e) / sigma_e + (s - mu_t) / sigma_t) with mean and
    population std taken over each side's cohort scores.
    """
    stats_e = {k: (float(np.mean(v)), float(np.std(v))) for k, v in enroll_cohort.items()}
    stats_t = {k: (float(np.mean(v)), float(np.std(v))) for k, v in test_cohort.items()}
    for k, v in list(enroll_cohort.items()) + list(test_cohort.items()):
        if len(v) < 2:
            raise DataError(f"cohort for {k!r} needs at least 2 scores")
    out = []
    for s in raw.scores:
        if s.enroll_model_id not in stats_e:
            raise DataError(f"missing enroll cohort for {s.enroll_model_id!r}")
        if s.test_id not in stats_t:
            raise DataError(f"missing test cohort for {s.test_id!r}")
        mu_e, sd_e = stats_e[s.enroll_model_id]
        mu_t, sd_t = stats_t[s.test_id]
        if sd_e == 0.0 or sd_t == 0.0:
            raise DataError(f"zero cohort deviation for trial "
                            f"({s.enroll_model_id!r}, {s.test_id!r})")
        val = 0.5 * ((s.score - mu_e) / sd_e + (s.score - mu_t) / sd_t)
        out.append(ScoredTrial(s.enroll_model_id, s.test_id, val, s.label))
    return ScoreSet(out)


def fuse(sets: list[ScoreSet], weights: list[float]) -> ScoreSet:
    """Fixed-weight linear fusion of score sets over identical trials."""
    if len(sets) != len(weights):
        raise ValueError("one weight per score set required")
    if not sets:
        raise ValueError("nothing to fuse")
    base = sets[0]
    keyed = []
    for ss in sets:
        m = {(s.enroll_model_id, s.test_id): s for s in ss.scores}
        if set(m) != {(s.enroll_model_id, s.test_id) for s in base.scores}:
            raise DataError("trial key mismatch across fused score sets")
        keyed.append(m)
    out = []
    for s in base.scores:
        key = (s.enroll_model_id, s.test_id)
        val = sum(w * m[key].score for w, m in zip(weights, keyed))
        out.append(ScoredTrial(s.enroll_model_id, s.test_id, val, s.label))
    return ScoreSet(out)
