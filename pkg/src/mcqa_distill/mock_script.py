"""Fabricate response scripts for the digest-keyed mock backend.

A script covers one planned pipeline run end to end: every prompt the run
will issue maps to a deterministic fabricated reply, including first-token
log-probabilities for the scoring stage. The fabricators mirror the
generation and scoring modules' prompt construction exactly (same seed
derivation, same exemplar-fitting), so the resulting runs never miss.
"""

from __future__ import annotations

from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .core import FewShotSet, McqaInstance, Provenance, stable_seed
from .datasets import simple_token_count
from .gateway import CompletionResult, request_digest
from .generation import GenerationConfig, attempt_seed
from .prompts import (
    DEFAULT_TEMPLATES,
    PromptTemplateSet,
    build_json_generation_prompt,
    build_negative_prompt,
    build_paraphrase_prompt,
    build_positive_prompt,
    build_question_prompt,
    format_example_object,
)
from .scoring import ScoringConfig, fit_scoring_prompt

Script = Dict[str, CompletionResult]


def _fabricated_fields(topic: str, seed: int, attempt: int, num_choices: int = 4):
    rng = np.random.default_rng(stable_seed(seed, "fabricate", attempt))
    question = f"Synthetic {topic} question {attempt}: which option is marked?"
    choices = [f"option {attempt}-{j} ({'abcdefgh'[j]})" for j in range(num_choices)]
    answer = int(rng.integers(num_choices))
    return question, choices, answer


def _teacher_logprobs(inst: McqaInstance) -> Dict[str, float]:
    # Noisy but gold-leaning: the fabricated teacher prefers the fabricated
    # answer, so scripted distillation runs carry a learnable signal.
    rng = np.random.default_rng(stable_seed("teacher-logprobs", inst.id))
    raw = rng.normal(size=inst.num_choices)
    raw[inst.answer_index] += 1.5
    shifted = raw - raw.max()
    logz = float(np.log(np.exp(shifted).sum()))
    return {
        chr(ord("A") + i): float(shifted[i] - logz) for i in range(inst.num_choices)
    }


def add_scoring_responses(
    script: Script,
    instances: List[McqaInstance],
    fs: FewShotSet,
    scoring_cfg: ScoringConfig,
    tok: Callable[[str], int] = simple_token_count,
) -> Script:
    """Script a scoring response for each instance's fitted prompt."""
    for inst in instances:
        messages = fit_scoring_prompt(inst, fs, scoring_cfg, tok)
        if messages is None:
            continue
        logprobs = _teacher_logprobs(inst)
        best = max(logprobs, key=logprobs.get)
        script[request_digest(messages)] = CompletionResult(
            text=best, first_token_logprobs=logprobs
        )
    return script


def fabricate_json_run(
    fs: FewShotSet,
    cfg: GenerationConfig,
    scoring_cfg: Optional[ScoringConfig] = None,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
    tok: Callable[[str], int] = simple_token_count,
) -> Tuple[Script, List[McqaInstance]]:
    """Script a JSON-strategy run where every attempt parses.

    Returns the script and the instances the run will emit (useful for
    scripting downstream stages).
    """
    script: Script = {}
    expected: List[McqaInstance] = []
    for attempt in range(cfg.target_count):
        messages = build_json_generation_prompt(
            fs, attempt_seed(cfg.seed, "json", attempt), templates
        )
        question, choices, answer = _fabricated_fields(fs.topic, cfg.seed, attempt)
        inst = McqaInstance(
            id=f"json-{cfg.seed}-{attempt:05d}",
            topic=fs.topic,
            question=question,
            choices=tuple(choices),
            answer_index=answer,
            provenance=Provenance("json", cfg.temperature, attempt),
        )
        script[request_digest(messages)] = CompletionResult(
            text=format_example_object(inst)
        )
        expected.append(inst)
    if scoring_cfg is not None:
        add_scoring_responses(script, expected, fs, scoring_cfg, tok)
    return script, expected


def fabricate_decomposed_run(
    fs: FewShotSet,
    cfg: GenerationConfig,
    scoring_cfg: Optional[ScoringConfig] = None,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
    tok: Callable[[str], int] = simple_token_count,
) -> Tuple[Script, List[McqaInstance]]:
    """Script a decomposed run with distinct negatives for every slot."""
    script: Script = {}
    expected: List[McqaInstance] = []
    for attempt in range(cfg.target_count):
        question = f"Synthetic staged {fs.topic} question {attempt}?"
        question_prompt = build_question_prompt(
            fs, attempt_seed(cfg.seed, "question", attempt), templates
        )
        script[request_digest(question_prompt)] = CompletionResult(text=question)
        positive = f"right answer {attempt}"
        script[request_digest(build_positive_prompt(fs, question, templates))] = (
            CompletionResult(text=positive)
        )
        forbidden = [positive]
        choices = [positive]
        for slot in range(cfg.negatives_n):
            negative = f"wrong answer {attempt}-{slot}"
            prompt = build_negative_prompt(fs, question, forbidden, templates)
            script[request_digest(prompt)] = CompletionResult(text=negative)
            forbidden.append(negative)
            choices.append(negative)
        expected.append(
            McqaInstance(
                id=f"decompose-{cfg.seed}-{attempt:05d}",
                topic=fs.topic,
                question=question,
                choices=tuple(choices),
                answer_index=0,
                provenance=Provenance("decompose", cfg.temperature, attempt),
            )
        )
    if scoring_cfg is not None:
        add_scoring_responses(script, expected, fs, scoring_cfg, tok)
    return script, expected


def fabricate_paraphrase_run(
    fs: FewShotSet,
    cfg: GenerationConfig,
    templates: PromptTemplateSet = DEFAULT_TEMPLATES,
    rewrite: Callable[[str], str] = lambda text: f"{text} (reworded)",
) -> Tuple[Script, List[McqaInstance]]:
    """Script a paraphrase run; ``rewrite`` fabricates each rewritten field."""
    script: Script = {}
    expected: List[McqaInstance] = []
    for attempt in range(cfg.target_count):
        source = fs.examples[attempt % len(fs.examples)]
        texts = [source.question, *source.choices]
        for text in texts:
            prompt = build_paraphrase_prompt(text, templates)
            script[request_digest(prompt)] = CompletionResult(text=rewrite(text))
        expected.append(
            McqaInstance(
                id=f"paraphrase-{cfg.seed}-{attempt:05d}",
                topic=fs.topic,
                question=rewrite(source.question),
                choices=tuple(rewrite(c) for c in source.choices),
                answer_index=source.answer_index,
                provenance=Provenance("paraphrase", cfg.temperature, attempt),
            )
        )
    return script, expected
