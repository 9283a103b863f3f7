"""Data model and text I/O for embedding tables, trial lists and score files.

All three file kinds are tab-separated UTF-8. Vector tables carry a
``#dim=<d>`` header; floats are written with 17 significant digits so that
save/load round-trips are bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LABELS = ("target", "nontarget", "unknown")

MISSING_SPEAKER = "-"


class DataError(ValueError):
    """Malformed or inconsistent corpus/trial/score data."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class VectorEntry:
    id: str
    corpus_id: str
    speaker_id: str | None
    values: np.ndarray  # 1-D float64, length == owning set's dim


@dataclass
class VectorSet:
    """A collection of fixed-dimension embeddings with corpus/speaker tags."""

    dim: int
    entries: list[VectorEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.dim < 1:
            raise DataError(f"dim must be positive, got {self.dim}")
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise DataError(f"duplicate id {e.id!r}")
            seen.add(e.id)
            if e.values.shape != (self.dim,):
                raise DataError(
                    f"entry {e.id!r} has dimension {e.values.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(e.values)):
                raise DataError(f"non-finite value in entry {e.id!r}")

    def __len__(self):
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def matrix(self) -> np.ndarray:
        """Stack all vectors into an (n, dim) array."""
        if not self.entries:
            return np.empty((0, self.dim))
        return np.stack([e.values for e in self.entries])

    def by_id(self) -> dict[str, VectorEntry]:
        return {e.id: e for e in self.entries}

    def subset(self, corpus_id: str) -> "VectorSet":
        return VectorSet(self.dim, [e for e in self.entries if e.corpus_id == corpus_id])

    def with_vectors(self, vectors: np.ndarray) -> "VectorSet":
        """Same ids/corpus/speaker tags, replaced coordinates."""
        if vectors.shape[0] != len(self.entries):
            raise DataError("vector count mismatch")
        dim = vectors.shape[1] if vectors.ndim == 2 else self.dim
        entries = [
            VectorEntry(e.id, e.corpus_id, e.speaker_id, np.asarray(vectors[i], dtype=float))
            for i, e in enumerate(self.entries)
        ]
        return VectorSet(dim, entries)


@dataclass(frozen=True)
class Trial:
    enroll_model_id: str
    test_id: str
    label: str  # target | nontarget | unknown


@dataclass
class TrialList:
    trials: list[Trial] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for t in self.trials:
            key = (t.enroll_model_id, t.test_id)
            if key in seen:
                raise DataError(f"duplicate trial {key}")
            seen.add(key)
            if t.label not in LABELS:
                raise DataError(f"unknown label {t.label!r}")

    def __len__(self):
        return len(self.trials)


@dataclass(frozen=True)
class ScoredTrial:
    enroll_model_id: str
    test_id: str
    score: float
    label: str


@dataclass
class ScoreSet:
    scores: list[ScoredTrial] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for s in self.scores:
            key = (s.enroll_model_id, s.test_id)
            if key in seen:
                raise DataError(f"duplicate trial {key}")
            seen.add(key)
            if s.label not in LABELS:
                raise DataError(f"unknown label {s.label!r}")
            if not math.isfinite(s.score):
                raise DataError(f"non-finite score for trial {key}")

    def __len__(self):
        return len(self.scores)

    def score_array(self, label: str) -> np.ndarray:
        return np.array([s.score for s in self.scores if s.label == label])


def load_vector_table(path) -> VectorSet:
    """Parse a vector table file; see the module docstring for the format."""
    dim = None
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if line.startswith("#dim="):
                    try:
                        dim = int(line[len("#dim="):])
                    except ValueError:
                        raise DataError(f"malformed header at line {lineno}: {line!r}")
                continue
            if dim is None:
                raise DataError(f"data before #dim= header at line {lineno}")
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"expected 4 tab-separated fields at line {lineno}")
            vid, corpus, speaker, coords = parts
            if not vid or any(c.isspace() for c in vid):
                raise DataError(f"bad id at line {lineno}")
            vals = coords.split()
            if len(vals) != dim:
                raise DataError(f"dimension mismatch at line {lineno}")
            try:
                vec = np.array([float(v) for v in vals])
            except ValueError:
                raise DataError(f"bad float at line {lineno}")
            if not np.all(np.isfinite(vec)):
                raise DataError(f"non-finite value at line {lineno}")
            spk = None if speaker == MISSING_SPEAKER else speaker
            entries.append(VectorEntry(vid, corpus, spk, vec))
    if dim is None:
        raise DataError("missing #dim= header")
    try:
        return VectorSet(dim, entries)
    except DataError as e:
        raise DataError(str(e))


def save_vector_table(vset: VectorSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#dim={vset.dim}\n")
        for e in vset.entries:
            spk = e.speaker_id if e.speaker_id is not None else MISSING_SPEAKER
            coords = " ".join(_fmt(v) for v in e.values)
            fh.write(f"{e.id}\t{e.corpus_id}\t{spk}\t{coords}\n")


def load_trials(path) -> TrialList:
    trials = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"expected 3 tab-separated fields at line {lineno}")
            model, test, label = parts
            if label not in LABELS:
                raise DataError(f"unknown label at line {lineno}: {label!r}")
            trials.append(Trial(model, test, label))
    return TrialList(trials)


def save_trials(tlist: TrialList, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in tlist.trials:
            fh.write(f"{t.enroll_model_id}\t{t.test_id}\t{t.label}\n")


def load_scores(path) -> ScoreSet:
    scores = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"expected 4 tab-separated fields at line {lineno}")
            model, test, score, label = parts
            if label not in LABELS:
                raise DataError(f"unknown label at line {lineno}: {label!r}")
            try:
                val = float(score)
            except ValueError:
                raise DataError(f"bad score at line {lineno}")
            scores.append(ScoredTrial(model, test, val, label))
    return ScoreSet(scores)


def save_scores(sset: ScoreSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sset.scores:
            fh.write(f"{s.enroll_model_id}\t{s.test_id}\t{_fmt(s.score)}\t{s.label}\n")
