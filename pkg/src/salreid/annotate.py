"""Human saliency annotation: sessions, trials, and part scores.

A labeler sees one masked body part and a shuffled 32-image gallery
that contains the cross-view image of the same person. They pick until
correct; the number of picks n measures how hard the part is to match.
Across labelers, a part's saliency is

    exp(-mean(n)^2 / sigma_avg^2) * exp(-std(n)^2 / sigma_std^2)

with the population standard deviation. State persists as an
append-only JSONL event log replayed on startup.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass, field
from math import exp
from typing import Sequence

import numpy as np

from .config import AnnotationConfig


@dataclass(frozen=True)
class PartMask:
    image_id: str
    part_id: str
    mask: np.ndarray  # (H, W) bool
    note: str = ""

    def __post_init__(self) -> None:
        if self.mask.ndim != 2 or not np.any(self.mask):
            raise ValueError("part mask must be a nonempty 2-D region")

    @property
    def key(self) -> tuple[str, str]:
        return (self.image_id, self.part_id)


@dataclass
class AnnotationSession:
    session_id: int
    labeler: str
    image_id: str
    part_id: str
    target: str
    sample: tuple  # 32 gallery image ids, target included, shuffled
    trials: list = field(default_factory=list)
    closed: bool = False

    @property
    def trial_count(self) -> int:
        return len(self.trials)

    @property
    def wrong(self) -> list:
        return [t for t in self.trials if t != self.target]


def sample_gallery(
    pool: Sequence[str], target: str, seed: int, session_id: int, size: int = 32
) -> tuple:
    """Target plus size-1 distractors, order fixed by (seed, session id)."""
    if target not in pool:
        raise ValueError("target missing from gallery pool")
    distractors = [p for p in pool if p != target]
    if len(distractors) < size - 1:
        raise ValueError(f"gallery pool must hold at least {size} images")
    rng = np.random.default_rng([seed, session_id])
    picked = [distractors[i] for i in rng.permutation(len(distractors))[: size - 1]]
    sample = picked + [target]
    order = rng.permutation(size)
    return tuple(sample[i] for i in order)


def part_saliency_score(trial_counts: Sequence[int], cfg: AnnotationConfig) -> float:
    """Score in (0,1], decreasing in both mean and spread of counts."""
    counts = np.asarray(trial_counts, dtype=np.float64)
    if len(counts) == 0:
        raise ValueError("no closed sessions for this part")
    m = float(counts.mean())
    s = float(counts.std())  # population std: one labeler gives 0
    return exp(-(m**2) / cfg.sigma_avg**2) * exp(-(s**2) / cfg.sigma_std**2)


class AnnotationStore:
    """Session registry with JSONL persistence; thread-safe mutations."""

    def __init__(
        self,
        parts: Sequence[PartMask],
        targets: dict,
        gallery_pool: Sequence[str],
        cfg: AnnotationConfig,
        seed: int = 0,
        log_path=None,
    ):
        self._parts = {p.key: p for p in parts}
        self._targets = dict(targets)  # query image id -> gallery target id
        self._pool = list(gallery_pool)
        self._cfg = cfg
        self._seed = seed
        self._log_path = log_path
        self._sessions: dict[int, AnnotationSession] = {}
        self._next_id = 1
        self._lock = threading.Lock()
        if log_path is not None:
            self._replay()

    @property
    def cfg(self) -> AnnotationConfig:
        return self._cfg

    def part(self, image_id: str, part_id: str) -> PartMask:
        try:
            return self._parts[(image_id, part_id)]
        except KeyError:
            raise KeyError(f"unknown part {image_id}/{part_id}") from None

    def parts(self) -> list[PartMask]:
        return list(self._parts.values())

    def session(self, session_id: int) -> AnnotationSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise KeyError(f"unknown session {session_id}") from None

    def create_session(
        self, labeler: str, image_id: str, part_id: str, session_id=None
    ) -> AnnotationSession:
        """New session; an explicit id is only passed during log replay."""
        part = self.part(image_id, part_id)
        if image_id not in self._targets:
            raise KeyError(f"no cross-view target for image {image_id}")
        target = self._targets[image_id]
        with self._lock:
            if session_id is None:
                session_id = self._next_id
            if session_id in self._sessions:
                raise ValueError(f"session id {session_id} already exists")
            self._next_id = max(self._next_id, session_id) + 1
            sample = sample_gallery(
                self._pool, target, self._seed, session_id, self._cfg.gallery_size
            )
            session = AnnotationSession(
                session_id=session_id,
                labeler=labeler,
                image_id=part.image_id,
                part_id=part.part_id,
                target=target,
                sample=sample,
            )
            self._sessions[session_id] = session
            self._append_event(
                {
                    "event": "session",
                    "session": session_id,
                    "labeler": labeler,
                    "image": image_id,
                    "part": part_id,
                }
            )
        return session

    def record_trial(self, session_id: int, chosen: str) -> tuple[bool, int]:
        with self._lock:
            session = self.session(session_id)
            if session.closed:
                raise ValueError(f"session {session_id} is closed")
            if chosen not in session.sample:
                raise ValueError(f"{chosen!r} is not in this session's gallery")
            session.trials.append(chosen)
            correct = chosen == session.target
            if correct:
                session.closed = True
            self._append_event(
                {"event": "trial", "session": session_id, "chosen": chosen}
            )
            return correct, session.trial_count

    def closed_counts(self, image_id: str, part_id: str) -> list[int]:
        return [
            s.trial_count
            for s in self._sessions.values()
            if s.closed and (s.image_id, s.part_id) == (image_id, part_id)
        ]

    def part_score(self, image_id: str, part_id: str) -> tuple[float, int]:
        self.part(image_id, part_id)
        counts = self.closed_counts(image_id, part_id)
        return part_saliency_score(counts, self._cfg), len(counts)

    def export_csv(self, path) -> None:
        """One row per part with enough closed sessions to score."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image", "part", "score", "labelers"])
            for part in self._parts.values():
                counts = self.closed_counts(part.image_id, part.part_id)
                if len(counts) < self._cfg.min_labelers:
                    continue
                score = part_saliency_score(counts, self._cfg)
                writer.writerow([part.image_id, part.part_id, repr(score), len(counts)])

    def _append_event(self, event: dict) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _replay(self) -> None:
        try:
            fh = open(self._log_path)
        except FileNotFoundError:
            return
        with fh:
            events = [json.loads(line) for line in fh if line.strip()]
        log_path, self._log_path = self._log_path, None  # no re-append
        try:
            for ev in events:
                if ev["event"] == "session":
                    self.create_session(
                        ev["labeler"], ev["image"], ev["part"], ev["session"]
                    )
                elif ev["event"] == "trial":
                    self.record_trial(ev["session"], ev["chosen"])
        finally:
            self._log_path = log_path
