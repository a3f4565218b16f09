"""Corpus persistence, importers, token-length filtering, cumulative
subsetting, and corpus statistics.

Corpora are JSON Lines: append-friendly during long generation runs, with
line-level fault isolation. An optional leading meta record carries source,
creation time and config digest; files without it load with empty meta, so
plain instance-per-line files from other tools import unchanged.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .core import (
    McqaInstance,
    Provenance,
    identifier_to_index,
    validate_instance,
    validate_parts,
)
from .generation import GenerationReport

IMPORT_FORMATS = ("arc_csv", "mmlu_csv", "generic_json")

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_CHOICE_LABEL_RE = re.compile(r"^\(?([A-Z0-9])[.):]\s*|^\(([A-Z0-9])\)\s*")


class MalformedLine(ValueError):
    """A corpus line that cannot be decoded into a valid instance."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SchemaError(ValueError):
    """An import row that does not match the declared layout."""

    def __init__(self, row_number: int, message: str):
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


def simple_token_count(text: str) -> int:
    """Whitespace-plus-punctuation token count; the default pluggable counter."""
    return len(_TOKEN_RE.findall(text))


@dataclass(frozen=True)
class CorpusMeta:
    source: str = ""
    created_at: str = ""
    config_digest: str = ""


@dataclass(frozen=True)
class Corpus:
    instances: tuple
    meta: CorpusMeta = field(default_factory=CorpusMeta)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        ids = [inst.id for inst in self.instances]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate instance ids in corpus: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


@dataclass
class CorpusStats:
    count: int
    token_len_mean: float
    token_len_std: float
    parse_success_rate: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "token_len_mean": self.token_len_mean,
            "token_len_std": self.token_len_std,
            "parse_success_rate": self.parse_success_rate,
        }


def instance_to_record(inst: McqaInstance) -> dict:
    record = {
        "id": inst.id,
        "topic": inst.topic,
        "question": inst.question,
        "choices": list(inst.choices),
        "answer": inst.answer_index,
    }
    if inst.teacher_scores is not None:
        record["teacher_scores"] = list(inst.teacher_scores)
    record["provenance"] = {
        "strategy": inst.provenance.strategy,
        "gen_temperature": inst.provenance.gen_temperature,
        "attempt": inst.provenance.attempt,
    }
    return record


def record_to_instance(record: dict) -> McqaInstance:
    for key in ("id", "topic", "question", "choices", "answer"):
        if key not in record:
            raise KeyError(key)
    prov = record.get("provenance", {})
    inst = McqaInstance(
        id=str(record["id"]),
        topic=str(record["topic"]),
        question=str(record["question"]),
        choices=tuple(str(c) for c in record["choices"]),
        answer_index=int(record["answer"]),
        teacher_scores=(
            tuple(float(s) for s in record["teacher_scores"])
            if record.get("teacher_scores") is not None
            else None
        ),
        provenance=Provenance(
            strategy=prov.get("strategy", "real"),
            gen_temperature=float(prov.get("gen_temperature", 0.0)),
            attempt=int(prov.get("attempt", 0)),
        ),
    )
    return inst


def write_jsonl(corpus: Corpus, path, include_meta: bool = True) -> None:
    """One instance per line; optional leading meta record."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if include_meta:
            meta = {
                "meta": {
                    "source": corpus.meta.source,
                    "created_at": corpus.meta.created_at,
                    "config_digest": corpus.meta.config_digest,
                }
            }
            fh.write(json.dumps(meta, ensure_ascii=False) + "\n")
        for inst in corpus.instances:
            fh.write(json.dumps(instance_to_record(inst), ensure_ascii=False) + "\n")


def read_jsonl(path) -> Corpus:
    """Inverse of write_jsonl; read(write(c)) == c. Raises MalformedLine."""
    path = Path(path)
    meta = CorpusMeta()
    instances: List[McqaInstance] = []
    with path.open("r", encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(number, f"invalid JSON: {exc}") from exc
            if number == 1 and isinstance(record, dict) and set(record) == {"meta"}:
                m = record["meta"]
                meta = CorpusMeta(
                    source=m.get("source", ""),
                    created_at=m.get("created_at", ""),
                    config_digest=m.get("config_digest", ""),
                )
                continue
            try:
                inst = record_to_instance(record)
            except KeyError as exc:
                raise MalformedLine(number, f"missing field {exc.args[0]!r}") from exc
            except (TypeError, ValueError) as exc:
                raise MalformedLine(number, str(exc)) from exc
            codes = validate_instance(inst)
            if codes:
                raise MalformedLine(number, f"invalid instance: {', '.join(codes)}")
            instances.append(inst)
    return Corpus(tuple(instances), meta)


def filter_by_tokens(
    corpus: Corpus, counter: Callable[[str], int], max_tokens: int
) -> Corpus:
    """Drop an instance iff any single question+choice pair exceeds max_tokens."""
    if max_tokens <= 0:
        raise ValueError("max_tokens must be positive")
    kept = tuple(
        inst
        for inst in corpus.instances
        if all(counter(inst.question + " " + c) <= max_tokens for c in inst.choices)
    )
    return Corpus(kept, corpus.meta)


def cumulative_subsets(corpus: Corpus, sizes: Sequence[int], seed: int) -> Dict[int, Corpus]:
    """Nested subsets: one seeded permutation, subset(k) = its first k elements.

    Smaller subsets are therefore prefixes of larger ones, isolating the
    effect of data volume.
    """
    sizes = list(sizes)
    if not sizes:
        raise ValueError("sizes must not be empty")
    if any(s <= 0 for s in sizes):
        raise ValueError("sizes must be positive")
    if sorted(sizes) != sizes:
        raise ValueError(f"sizes must be ascending: {sizes}")
    if sizes[-1] > len(corpus):
        raise ValueError(
            f"size {sizes[-1]} exceeds corpus of {len(corpus)} instances"
        )
    shuffled = list(corpus.instances)
    Random(seed).shuffle(shuffled)
    return {size: Corpus(tuple(shuffled[:size]), corpus.meta) for size in sizes}


def compute_stats(
    corpus: Corpus,
    counter: Callable[[str], int] = simple_token_count,
    report: Optional[GenerationReport] = None,
) -> CorpusStats:
    """Token-length mean and population std over question + all choices."""
    lengths = [
        counter(inst.question + " " + " ".join(inst.choices)) for inst in corpus.instances
    ]
    if lengths:
        mean = float(np.mean(lengths))
        std = float(np.std(lengths))
    else:
        mean = std = 0.0
    return CorpusStats(
        count=len(lengths),
        token_len_mean=mean,
        token_len_std=std,
        parse_success_rate=report.success_rate if report is not None else None,
    )


def _strip_choice_label(text: str) -> str:
    return _CHOICE_LABEL_RE.sub("", text.strip(), count=1)


def _answer_key_to_index(key: str, num_choices: int, row_number: int) -> int:
    key = key.strip()
    if key.isdigit():
        index = int(key) - 1
    else:
        try:
            index = identifier_to_index(key)
        except ValueError as exc:
            raise SchemaError(row_number, f"bad answer key {key!r}") from exc
    if not 0 <= index < num_choices:
        raise SchemaError(
            row_number, f"answer key {key!r} out of range for {num_choices} choices"
        )
    return index


def _checked_instance(
    row_number: int,
    instance_id: str,
    topic: str,
    question: str,
    choices: Sequence[str],
    answer_index: int,
) -> McqaInstance:
    codes = validate_parts(question, choices, answer_index)
    if codes:
        raise SchemaError(row_number, f"invalid instance: {', '.join(codes)}")
    return McqaInstance(
        id=instance_id,
        topic=topic,
        question=question,
        choices=tuple(choices),
        answer_index=answer_index,
        provenance=Provenance("real", 0.0, 0),
    )


def _import_arc_csv(path: Path, topic: str) -> List[McqaInstance]:
    instances = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"question", "choices", "answerKey"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(0, f"header must contain {sorted(required)}")
        for number, row in enumerate(reader, start=1):
            choices = [
                _strip_choice_label(part)
                for part in row["choices"].split("|")
                if part.strip()
            ]
            if len(choices) < 2:
                raise SchemaError(number, "fewer than 2 choices")
            answer = _answer_key_to_index(row["answerKey"], len(choices), number)
            instance_id = (row.get("id") or f"arc-{number:05d}").strip()
            instances.append(
                _checked_instance(
                    number, instance_id, topic, row["question"].strip(), choices, answer
                )
            )
    return instances


def _import_mmlu_csv(path: Path, topic: str) -> List[McqaInstance]:
    instances = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for number, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if len(row) < 4:
                raise SchemaError(number, "expected question, choices, answer key")
            question, *choices, key = row
            if len(choices) < 2:
                raise SchemaError(number, "fewer than 2 choices")
            answer = _answer_key_to_index(key, len(choices), number)
            instances.append(
                _checked_instance(
                    number,
                    f"mmlu-{number:05d}",
                    topic,
                    question.strip(),
                    [c.strip() for c in choices],
                    answer,
                )
            )
    return instances


def import_benchmark(path, format: str, topic: Optional[str] = None) -> Corpus:
    """Normalize a benchmark file into a Corpus.

    ``arc_csv``: header question,choices,answerKey (optional id); the choices
    cell holds label-prefixed entries joined by '|'; answer keys may be
    letters or 1-based digits. ``mmlu_csv``: headerless rows of question,
    choice columns, answer letter. ``generic_json``: this package's JSONL.
    Rows violating instance invariants (duplicate choices included) are
    flagged as SchemaError rather than silently dropped.
    """
    path = Path(path)
    if format not in IMPORT_FORMATS:
        raise ValueError(f"unknown import format {format!r}")
    topic = topic if topic is not None else path.stem
    if format == "generic_json":
        return read_jsonl(path)
    if format == "arc_csv":
        instances = _import_arc_csv(path, topic)
    else:
        instances = _import_mmlu_csv(path, topic)
    return Corpus(tuple(instances), CorpusMeta(source=str(path)))
