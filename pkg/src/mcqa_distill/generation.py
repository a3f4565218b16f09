"""Produce McqaInstances from a few-shot set: JSON strategy, decomposed
strategy, or the paraphrase baseline, with full parse accounting.

The JSON strategy asks the teacher for a complete object per attempt and is
lossy (malformed output is rejected and accounted). The decomposed strategy
builds one instance from three stages (question, positive answer, N sequential
negatives against a growing forbidden list) and needs no parsing. Paraphrase
rewrites the seed examples field by field.
"""

from __future__ import annotations

import ast
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .core import (
    FewShotSet,
    McqaInstance,
    Provenance,
    canonical_choice,
    stable_seed,
    validate_parts,
)
from .gateway import CompletionRequest, GatewayError, ScriptMiss
from .prompts import (
    DEFAULT_TEMPLATES,
    PromptTemplateSet,
    build_json_generation_prompt,
    build_negative_prompt,
    build_paraphrase_prompt,
    build_positive_prompt,
    build_question_prompt,
)

# Parser rejection reasons (validation codes from core are also used).
NO_OBJECT = "NO_OBJECT"
UNBALANCED = "UNBALANCED"
BAD_SYNTAX = "BAD_SYNTAX"
MISSING_KEY = "MISSING_KEY"
WRONG_TYPE = "WRONG_TYPE"
STAGE_FAILURE = "STAGE_FAILURE"

GENERATION_MAX_NEW_TOKENS = 512
# Identical re-requests for a colliding negative before the slot is dropped.
NEGATIVE_SLOT_RETRIES = 3


@dataclass(frozen=True)
class GenerationConfig:
    strategy: str = "json"
    temperature: float = 2.0
    negatives_n: int = 5
    target_count: int = 1024
    seed: int = 0
    max_attempts: Optional[int] = None
    shuffle_choices: bool = False

    def __post_init__(self):
        if self.strategy not in ("json", "decompose", "paraphrase"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.temperature <= 0:
            raise ValueError("generation temperature must be > 0")
        if self.negatives_n < 1:
            raise ValueError("negatives_n must be >= 1")
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")

    @property
    def attempt_budget(self) -> int:
        return self.max_attempts if self.max_attempts is not None else 20 * self.target_count


@dataclass
class GenerationReport:
    """Per-run accounting: attempted = parsed + sum of rejections."""

    attempted: int = 0
    parsed: int = 0
    rejected_by_reason: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return self.parsed / self.attempted if self.attempted else 0.0

    def to_dict(self) -> dict:
        return {
            "attempted": self.attempted,
            "parsed": self.parsed,
            "rejected_by_reason": dict(sorted(self.rejected_by_reason.items())),
            "success_rate": self.success_rate,
        }


def attempt_seed(run_seed: int, stage: str, attempt: int) -> int:
    """Per-attempt shuffle seed; shared with the mock-script fabricators."""
    return stable_seed(run_seed, stage, attempt)


def extract_object_block(raw: str) -> Tuple[Optional[str], Optional[str]]:
    """Return the first balanced-brace block, skipping braces inside strings."""
    start = raw.find("{")
    if start < 0:
        return None, NO_OBJECT
    depth = 0
    quote = None
    escaped = False
    for i in range(start, len(raw)):
        ch = raw[i]
        if quote is not None:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return raw[start : i + 1], None
    return None, UNBALANCED


def parse_json_candidate(raw: str) -> Tuple[Optional[dict], Optional[str]]:
    """Parse one teacher reply into instance fields, or name the rejection.

    Accepts strict JSON and the single-quoted object style the few-shot
    prompts demonstrate, and strips any prose around the object. Returns
    ``({question, choices, answer_index}, None)`` on success, else
    ``(None, reason)``.
    """
    block, reason = extract_object_block(raw)
    if block is None:
        return None, reason
    obj = None
    try:
        obj = json.loads(block)
    except (json.JSONDecodeError, ValueError):
        try:
            obj = ast.literal_eval(block)
        except (ValueError, SyntaxError, MemoryError, RecursionError):
            return None, BAD_SYNTAX
    if not isinstance(obj, dict):
        return None, BAD_SYNTAX
    for key in ("question", "choices", "answer"):
        if key not in obj:
            return None, MISSING_KEY
    question, choices, answer = obj["question"], obj["choices"], obj["answer"]
    if not isinstance(question, str):
        return None, WRONG_TYPE
    if not isinstance(choices, (list, tuple)) or not all(
        isinstance(c, str) for c in choices
    ):
        return None, WRONG_TYPE
    if isinstance(answer, bool) or not isinstance(answer, int):
        return None, WRONG_TYPE
    question = question.strip()
    choices = [c.strip() for c in choices]
    codes = validate_parts(question, choices, answer)
    if codes:
        return None, codes[0]
    return {"question": question, "choices": choices, "answer_index": answer}, None


def generate_json(
    fs: FewShotSet,
    cfg: GenerationConfig,
    gw,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
) -> Tuple[List[McqaInstance], GenerationReport]:
    """Repeatedly prompt, parse, and validate until target_count or budget.

    Each attempt gets a fresh exemplar shuffle. A run that exhausts its budget
    returns the partial set; the report accounts every attempt either way.
    """
    if cfg.strategy != "json":
        raise ValueError(f"config strategy is {cfg.strategy!r}, expected 'json'")
    out: List[McqaInstance] = []
    rejected: Counter = Counter()
    attempted = 0
    for attempt in range(cfg.attempt_budget):
        if len(out) >= cfg.target_count:
            break
        attempted += 1
        messages = build_json_generation_prompt(
            fs, attempt_seed(cfg.seed, "json", attempt), templates
        )
        try:
            result = gw.complete(
                CompletionRequest(messages, cfg.temperature, GENERATION_MAX_NEW_TOKENS)
            )
        except ScriptMiss:
            raise
        except GatewayError:
            rejected[STAGE_FAILURE] += 1
            continue
        fields, reason = parse_json_candidate(result.text)
        if fields is None:
            rejected[reason] += 1
            continue
        out.append(
            McqaInstance(
                id=f"json-{cfg.seed}-{attempt:05d}",
                topic=fs.topic,
                question=fields["question"],
                choices=tuple(fields["choices"]),
                answer_index=fields["answer_index"],
                provenance=Provenance("json", cfg.temperature, attempt),
            )
        )
    return out, GenerationReport(attempted, len(out), dict(rejected))


def _decomposed_choices(
    fs: FewShotSet,
    cfg: GenerationConfig,
    gw,
    templates: PromptTemplateSet,
    question: str,
    positive: str,
) -> List[str]:
    """Sequential negatives against a growing forbidden list.

    A candidate that collides with an existing choice (after trim/case-fold)
    is re-requested up to NEGATIVE_SLOT_RETRIES times, then its slot is
    dropped. A dropped slot's last colliding form is appended to the
    forbidden list (when its exact form is new) so later slots explicitly
    steer the teacher away from it; with the scripted mock this also keeps
    later prompts distinct from the stuck one.
    """
    choices = [positive]
    forbidden = [positive]
    for _slot in range(cfg.negatives_n):
        accepted = None
        candidate = ""
        for _try in range(1 + NEGATIVE_SLOT_RETRIES):
            messages = build_negative_prompt(fs, question, forbidden, templates)
            candidate = gw.complete(
                CompletionRequest(messages, cfg.temperature, GENERATION_MAX_NEW_TOKENS)
            ).text.strip()
            if candidate and canonical_choice(candidate) not in {
                canonical_choice(c) for c in choices
            }:
                accepted = candidate
                break
        if accepted is not None:
            choices.append(accepted)
            forbidden.append(accepted)
        elif candidate and candidate not in forbidden:
            forbidden.append(candidate)
    return choices


def generate_decomposed(
    fs: FewShotSet,
    cfg: GenerationConfig,
    gw,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
) -> Tuple[List[McqaInstance], GenerationReport]:
    """Three-stage assembly: question, positive answer, N sequential negatives.

    The positive answer is generated first, so the emitted answer_index is 0
    unless shuffle_choices remaps it. A gateway failure mid-instance discards
    only that instance and is counted in the report.
    """
    if cfg.strategy != "decompose":
        raise ValueError(f"config strategy is {cfg.strategy!r}, expected 'decompose'")
    out: List[McqaInstance] = []
    rejected: Counter = Counter()
    attempted = 0
    for attempt in range(cfg.attempt_budget):
        if len(out) >= cfg.target_count:
            break
        attempted += 1
        try:
            question = gw.complete(
                CompletionRequest(
                    build_question_prompt(
                        fs, attempt_seed(cfg.seed, "question", attempt), templates
                    ),
                    cfg.temperature,
                    GENERATION_MAX_NEW_TOKENS,
                )
            ).text.strip()
            if not question:
                rejected["EMPTY_FIELD"] += 1
                continue
            positive = gw.complete(
                CompletionRequest(
                    build_positive_prompt(fs, question, templates),
                    cfg.temperature,
                    GENERATION_MAX_NEW_TOKENS,
                )
            ).text.strip()
            if not positive:
                rejected["EMPTY_FIELD"] += 1
                continue
            choices = _decomposed_choices(fs, cfg, gw, templates, question, positive)
        except ScriptMiss:
            raise
        except GatewayError:
            rejected[STAGE_FAILURE] += 1
            continue
        answer_index = 0
        if cfg.shuffle_choices:
            order = list(range(len(choices)))
            random.Random(attempt_seed(cfg.seed, "shuffle", attempt)).shuffle(order)
            choices = [choices[i] for i in order]
            answer_index = order.index(0)
        codes = validate_parts(question, choices, answer_index)
        if codes:
            rejected[codes[0]] += 1
            continue
        out.append(
            McqaInstance(
                id=f"decompose-{cfg.seed}-{attempt:05d}",
                topic=fs.topic,
                question=question,
                choices=tuple(choices),
                answer_index=answer_index,
                provenance=Provenance("decompose", cfg.temperature, attempt),
            )
        )
    return out, GenerationReport(attempted, len(out), dict(rejected))


def generate_paraphrase(
    fs: FewShotSet,
    cfg: GenerationConfig,
    gw,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
) -> Tuple[List[McqaInstance], GenerationReport]:
    """Round-robin over the seed examples, paraphrasing every text field.

    The question and each choice are rewritten independently; the answer
    index is preserved from the source example. Textual duplicates across the
    corpus are allowed here (corpus statistics surface them).
    """
    if cfg.strategy != "paraphrase":
        raise ValueError(f"config strategy is {cfg.strategy!r}, expected 'paraphrase'")
    out: List[McqaInstance] = []
    rejected: Counter = Counter()
    attempted = 0
    for attempt in range(cfg.attempt_budget):
        if len(out) >= cfg.target_count:
            break
        attempted += 1
        source = fs.examples[attempt % len(fs.examples)]
        try:
            question = gw.complete(
                CompletionRequest(
                    build_paraphrase_prompt(source.question, templates),
                    cfg.temperature,
                    GENERATION_MAX_NEW_TOKENS,
                )
            ).text.strip()
            choices = [
                gw.complete(
                    CompletionRequest(
                        build_paraphrase_prompt(choice, templates),
                        cfg.temperature,
                        GENERATION_MAX_NEW_TOKENS,
                    )
                ).text.strip()
                for choice in source.choices
            ]
        except ScriptMiss:
            raise
        except GatewayError:
            rejected[STAGE_FAILURE] += 1
            continue
        codes = validate_parts(question, choices, source.answer_index)
        if codes:
            rejected[codes[0]] += 1
            continue
        out.append(
            McqaInstance(
                id=f"paraphrase-{cfg.seed}-{attempt:05d}",
                topic=fs.topic,
                question=question,
                choices=tuple(choices),
                answer_index=source.answer_index,
                provenance=Provenance("paraphrase", cfg.temperature, attempt),
            )
        )
    return out, GenerationReport(attempted, len(out), dict(rejected))


def generate(
    fs: FewShotSet,
    cfg: GenerationConfig,
    gw,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
) -> Tuple[List[McqaInstance], GenerationReport]:
    """Dispatch on cfg.strategy."""
    runner = {
        "json": generate_json,
        "decompose": generate_decomposed,
        "paraphrase": generate_paraphrase,
    }[cfg.strategy]
    return runner(fs, cfg, gw, templates)
