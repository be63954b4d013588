"""FRR / FAR / EER evaluation.

A score is accepted iff ``score >= threshold``, everywhere.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_io import read_wav
from .errors import EvalError, WakegateError

log = logging.getLogger(__name__)

CATEGORIES = ("voice-authp", "voice-authn", "tts-wwp", "tts-wwn", "conversation")
WAKEWORD_POSITIVE = ("voice-authp", "voice-authn", "tts-wwp")
WAKEWORD_NEGATIVE = ("tts-wwn", "conversation")
AUTH_POSITIVE = ("voice-authp",)
AUTH_NEGATIVE = ("voice-authn",)


@dataclass
class ScoreSet:
    positives: np.ndarray
    negatives: np.ndarray
    task: str = "wakeword"
    skipped: list = field(default_factory=list)

    def __post_init__(self):
        self.positives = np.asarray(self.positives, dtype=np.float64).reshape(-1)
        self.negatives = np.asarray(self.negatives, dtype=np.float64).reshape(-1)

    def check(self) -> None:
        if self.positives.size == 0:
            raise EvalError(f"no positive scores ({'/'.join(_categories(self.task)[0])})")
        if self.negatives.size == 0:
            raise EvalError(f"no negative scores ({'/'.join(_categories(self.task)[1])})")


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    frr: float
    far: float


@dataclass(frozen=True)
class EerResult:
    eer: float
    threshold: float
    method: str


def frr(positives, t: float) -> float:
    """Fraction of positives rejected (score below ``t``)."""
    positives = np.asarray(positives, dtype=np.float64)
    if positives.size == 0:
        raise EvalError("EmptyPositives: FRR needs positive scores")
    return np.count_nonzero(positives < t) / positives.size


def far(negatives, t: float) -> float:
    """Fraction of negatives accepted (score at or above ``t``)."""
    negatives = np.asarray(negatives, dtype=np.float64)
    if negatives.size == 0:
        raise EvalError("EmptyNegatives: FAR needs negative scores")
    return np.count_nonzero(negatives >= t) / negatives.size


def sweep_thresholds(step: float = 0.05) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.arange(n + 1) / n


def sweep(scores: ScoreSet, step: float = 0.05) -> list[SweepPoint]:
    """FRR and FAR at thresholds 0, step, ..., 1 (21 points by default)."""
    scores.check()
    return [SweepPoint(float(t), frr(scores.positives, t), far(scores.negatives, t))
            for t in sweep_thresholds(step)]


def _crossing(thresholds, frrs, fars):
    """Where the polyline through (frr, far) operating points meets frr == far.

    Points are ordered by increasing threshold, so far - frr never increases.
    Returns ``(eer, threshold)``.
    """
    d = np.asarray(fars) - np.asarray(frrs)
    hits = np.flatnonzero(d == 0)
    if hits.size:
        i = hits[0]
        return float(frrs[i]), float(thresholds[i])
    for i in range(len(d) - 1):
        if d[i] > 0 > d[i + 1]:
            a = d[i] / (d[i] - d[i + 1])
            eer = frrs[i] + a * (frrs[i + 1] - frrs[i])
            return float(eer), float(thresholds[i] + a * (thresholds[i + 1] - thresholds[i]))
    # no crossing inside the range: report the closest balance
    i = int(np.argmin(np.abs(d)))
    return float((frrs[i] + fars[i]) / 2), float(thresholds[i])


def exact_operating_points(scores: ScoreSet):
    """FRR/FAR at every distinct cut: each distinct score, plus accept-all and accept-none."""
    scores.check()
    pos = np.sort(scores.positives)
    neg = np.sort(scores.negatives)
    allv = np.unique(np.concatenate([pos, neg]))
    top = allv[-1]
    thresholds = np.concatenate([[min(0.0, allv[0])], allv, [np.nextafter(max(top, 1.0), np.inf)]])
    thresholds = np.unique(thresholds)
    frrs = np.searchsorted(pos, thresholds, side="left") / pos.size
    fars = 1.0 - np.searchsorted(neg, thresholds, side="left") / neg.size
    return thresholds, frrs, fars


def eer(scores: ScoreSet, method: str = "sweep_interpolated", step: float = 0.05) -> EerResult:
    """Equal error rate.

    ``sweep_interpolated`` linearly interpolates the 0.05-step sweep between
    the two points where FAR - FRR changes sign. ``exact`` does the same over
    every distinct cut of the scores, which is where the operating curve
    actually crosses FAR == FRR.
    """
    if method == "sweep_interpolated":
        pts = sweep(scores, step)
        value, t = _crossing([p.threshold for p in pts], [p.frr for p in pts], [p.far for p in pts])
    elif method == "exact":
        value, t = _crossing(*exact_operating_points(scores))
    else:
        raise ValueError(f"unknown EER method {method!r}")
    return EerResult(min(max(value, 0.0), 1.0), t, method)


# manifests and score collection -------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    category: str


def read_manifest(path) -> list[ManifestEntry]:
    """CSV with header ``path,category``; relative paths resolve against the manifest."""
    path = Path(path)
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) != {"path", "category"}:
            raise EvalError(f"{path}: manifest header must be path,category")
        for row in reader:
            if row["category"] not in CATEGORIES:
                raise EvalError(f"{path}: unknown category {row['category']!r}")
            clip = Path(row["path"])
            entries.append(ManifestEntry(clip if clip.is_absolute() else path.parent / clip, row["category"]))
    return entries


def write_manifest(entries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "category"])
        for e in entries:
            w.writerow([str(e.path), e.category])


def _categories(task: str):
    if task == "wakeword":
        return WAKEWORD_POSITIVE, WAKEWORD_NEGATIVE
    if task == "auth":
        return AUTH_POSITIVE, AUTH_NEGATIVE
    raise ValueError(f"unknown task {task!r}")


def clip_score(engine, samples, task: str, gate_level: bool = False) -> float | None:
    """Raw per-clip score: max wakeword probability, or the auth similarity.

    With ``gate_level`` the wakeword score becomes 1.0 if the full
    activation/cooldown gate fires on the clip and 0.0 otherwise.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < engine.config.mel_samples:
        return None
    if task == "wakeword":
        if gate_level:
            cid = f"_gate_{id(samples)}"
            engine.register_client(cid)
            try:
                return 1.0 if engine.step(cid, samples) else 0.0
            finally:
                engine.clients.pop(cid, None)
        probs = engine.clip_probabilities(samples)
        return float(probs.max()) if probs.size else None
    from .speaker_auth import authenticate

    result = authenticate(engine.profile, samples, engine.encoder, engine.auth_config)
    return result.similarity


def collect_scores(engine, manifest, task: str, gate_level: bool = False) -> ScoreSet:
    """Score every manifest clip relevant to ``task``.

    Unreadable or too-short clips are skipped and listed in ``ScoreSet.skipped``.
    """
    pos_cats, neg_cats = _categories(task)
    pos, neg, skipped = [], [], []
    for entry in manifest:
        if entry.category not in pos_cats + neg_cats:
            continue
        try:
            score = clip_score(engine, read_wav(entry.path), task, gate_level)
        except (WakegateError, OSError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            skipped.append((str(entry.path), str(exc)))
            continue
        if score is None:
            skipped.append((str(entry.path), "too short to score"))
            continue
        (pos if entry.category in pos_cats else neg).append(score)
    if skipped:
        log.info("%d clips skipped", len(skipped))
    return ScoreSet(np.array(pos), np.array(neg), task, skipped)


# reports ------------------------------------------------------------------


def report(points, result: EerResult, path) -> None:
    """CSV: ``threshold,frr,far`` rows, then ``eer,<eer>,<threshold>``; 6 decimals."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "frr", "far"])
        for p in points:
            w.writerow([f"{p.threshold:.6f}", f"{p.frr:.6f}", f"{p.far:.6f}"])
        w.writerow(["eer", f"{result.eer:.6f}", f"{result.threshold:.6f}"])


def read_report(path):
    points, summary = [], None
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        if row[0] == "eer":
            summary = (float(row[1]), float(row[2]))
        else:
            points.append(SweepPoint(*map(float, row)))
    return points, summary
