"""Caption curation and synonym-replacement augmentation.

Curation keeps captions containing an exact word-boundary match of some
class's match words. Augmentation replaces each matched word with each of
its class's synonyms, one replacement per emitted variant, so a corpus of
T single-match captions and C synonyms per class expands to T*C variants
plus the T originals. Filtering ranks records by externally supplied
alignment scores.
"""

import json
import random
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigError, ScoreMissingError
from .masks import ClassTable


@dataclass(frozen=True)
class Match:
    class_id: int
    start: int
    end: int
    matched_word: str


@dataclass(frozen=True)
class PromptRecord:
    text: str
    matches: tuple[Match, ...]
    origin: str = "raw"  # "raw" or "augmented"
    parent_index: int | None = None
    replacement: str | None = None
    score: float | None = None

    def __post_init__(self):
        for m in self.matches:
            if not (0 <= m.start < m.end <= len(self.text)):
                raise ConfigError("match span out of bounds")
            if self.text[m.start:m.end].lower() != m.matched_word:
                raise ConfigError("match span does not cover matched word")
        spans = sorted((m.start, m.end) for m in self.matches)
        for (_, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 < e1:
                raise ConfigError("overlapping match spans")
        if self.origin == "augmented" and self.parent_index is None:
            raise ConfigError("augmented record needs a parent index")


@dataclass(frozen=True)
class SynonymTable:
    words: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for cid, syns in self.words.items():
            if not syns:
                raise ConfigError(f"empty synonym list for class {cid}")
            for w in syns:
                if w != w.lower():
                    raise ConfigError(f"synonym {w!r} is not lowercase")

    @classmethod
    def from_json(cls, path, table: ClassTable) -> "SynonymTable":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        names = table.name_to_class()
        words = {}
        for name, syns in raw.items():
            if name not in names:
                raise ConfigError(f"unknown class name {name!r} in synonyms")
            words[names[name]] = tuple(w.lower() for w in syns)
        return cls(words=words)


def curate(corpus: list[str], table: ClassTable) -> list[PromptRecord]:
    """Keep captions with at least one exact word match of a class word."""
    lookup = table.word_to_class()
    pattern = re.compile(
        r"\b(" + "|".join(re.escape(w) for w in sorted(lookup, key=len,
                                                       reverse=True)) + r")\b",
        re.IGNORECASE)
    out = []
    for text in corpus:
        matches = tuple(
            Match(class_id=lookup[m.group(1).lower()],
                  start=m.start(1), end=m.end(1),
                  matched_word=m.group(1).lower())
            for m in pattern.finditer(text))
        if matches:
            out.append(PromptRecord(text=text, matches=matches))
    return out


def _replace_span(rec: PromptRecord, target: Match, word: str,
                  parent_index: int) -> PromptRecord:
    text = rec.text[:target.start] + word + rec.text[target.end:]
    shift = len(word) - (target.end - target.start)
    new_matches = []
    for m in rec.matches:
        if m is target:
            new_matches.append(Match(m.class_id, m.start, m.start + len(word), word))
        elif m.start >= target.end:
            new_matches.append(Match(m.class_id, m.start + shift, m.end + shift,
                                     m.matched_word))
        else:
            new_matches.append(m)
    return PromptRecord(text=text, matches=tuple(new_matches),
                        origin="augmented", parent_index=parent_index,
                        replacement=word)


def augment(records: list[PromptRecord], syn: SynonymTable,
            policy: str = "one_per_synonym", k: int = 1,
            seed: int = 0) -> list[PromptRecord]:
    """Expand curated records by synonym replacement.

    one_per_synonym emits every variant; sample draws k variants per record
    deterministically under the seed. Originals are always kept, first.
    """
    out = list(records)
    for i, rec in enumerate(records):
        variants = []
        for m in rec.matches:
            for word in syn.words.get(m.class_id, ()):
                if word == m.matched_word:
                    continue
                variants.append(_replace_span(rec, m, word, parent_index=i))
        if policy == "one_per_synonym":
            out.extend(variants)
        elif policy == "sample":
            rng = random.Random((seed << 32) + i)
            out.extend(rng.sample(variants, min(k, len(variants))))
        else:
            raise ConfigError(f"unknown augmentation policy {policy!r}")
    return out


def filter_by_score(records: list[PromptRecord], k: int | None = None,
                    threshold: float | None = None) -> list[PromptRecord]:
    """Top-k by descending score (stable ties) or all records >= threshold."""
    if (k is None) == (threshold is None):
        raise ConfigError("pass exactly one of k or threshold")
    for i, rec in enumerate(records):
        if rec.score is None:
            raise ScoreMissingError(f"record {i} has no score")
    if threshold is not None:
        return [r for r in records if r.score >= threshold]
    order = sorted(range(len(records)),
                   key=lambda i: (-records[i].score, i))
    return [records[i] for i in order[:k]]


def load_corpus(path) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


def load_scores(path) -> dict[int, float]:
    """Scores TSV: one 'index<TAB>score' row per line, header optional."""
    scores = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.lower().startswith("index"):
                continue
            idx, val = line.split("\t")
            scores[int(idx)] = float(val)
    return scores


def attach_scores(records: list[PromptRecord],
                  scores: dict[int, float]) -> list[PromptRecord]:
    out = []
    for i, rec in enumerate(records):
        if i not in scores:
            raise ScoreMissingError(f"no score for record {i}")
        out.append(replace(rec, score=scores[i]))
    return out


def _record_to_json(rec: PromptRecord) -> dict:
    d = {
        "text": rec.text,
        "matches": [
            {"class_id": m.class_id, "word_span": [m.start, m.end],
             "matched_word": m.matched_word}
            for m in rec.matches
        ],
        "origin": rec.origin,
    }
    if rec.origin == "augmented":
        d["parent_index"] = rec.parent_index
        d["replacement"] = rec.replacement
    if rec.score is not None:
        d["score"] = rec.score
    return d


def _record_from_json(d: dict) -> PromptRecord:
    return PromptRecord(
        text=d["text"],
        matches=tuple(
            Match(class_id=m["class_id"], start=m["word_span"][0],
                  end=m["word_span"][1], matched_word=m["matched_word"])
            for m in d["matches"]),
        origin=d.get("origin", "raw"),
        parent_index=d.get("parent_index"),
        replacement=d.get("replacement"),
        score=d.get("score"))


def write_records(records: list[PromptRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(_record_to_json(rec), sort_keys=True) + "\n")


def read_records(path) -> list[PromptRecord]:
    with open(path, encoding="utf-8") as f:
        return [_record_from_json(json.loads(line)) for line in f if line.strip()]
