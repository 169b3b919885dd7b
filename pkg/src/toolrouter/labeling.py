"""Turn (response, gold) pairs into labeled scores via text matching.

The score of a tool on a query is how well the response produced with that
tool matches the gold answer, as a number in [0, 1]. Matching is token-level
F1 by default, with exact match and max-of-both available.
"""

from __future__ import annotations

import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import LabeledQuery, ToolRegistry
from .errors import DataError, DuplicateResponseError, EmptyGoldError, InvalidConfigError

logger = logging.getLogger(__name__)

MATCH_MODES = ("token_f1", "exact_match", "max_of_both")

# Pipeline identifier; bump if normalize() ever changes behavior.
NORMALIZATION = "lower-strippunct-collapsews-v1"


@dataclass(frozen=True)
class ResponseRecord:
    """One tool's response to one query. May be empty (failed call)."""

    query_id: str
    tool_id: str
    response: str


@dataclass(frozen=True)
class MatchConfig:
    mode: str = "token_f1"
    cjk_char_tokens: bool = True
    normalization: str = NORMALIZATION

    def __post_init__(self):
        if self.mode not in MATCH_MODES:
            raise InvalidConfigError(f"mode must be one of {MATCH_MODES}, got {self.mode!r}")
        if self.normalization != NORMALIZATION:
            raise InvalidConfigError(f"unsupported normalization {self.normalization!r}")


def normalize(text: str) -> str:
    """Lowercase, drop punctuation/symbol characters (unicode categories P
    and S), collapse whitespace runs to single spaces, strip the ends."""
    kept = []
    for ch in text.lower():
        if unicodedata.category(ch)[0] in ("P", "S"):
            continue
        kept.append(ch)
    return " ".join("".join(kept).split())


# Han, kana and hangul blocks commonly seen in CJK answers.
_CJK_RANGES = (
    (0x3040, 0x30FF),   # hiragana + katakana
    (0x3400, 0x4DBF),   # CJK ext A
    (0x4E00, 0x9FFF),   # CJK unified
    (0xAC00, 0xD7AF),   # hangul syllables
    (0xF900, 0xFAFF),   # CJK compatibility
    (0x20000, 0x2EBEF), # CJK ext B..F
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str, cjk_char_tokens: bool = True) -> list[str]:
    """Split normalized text into tokens: CJK codepoints become one token
    each (when enabled), everything else splits on whitespace."""
    tokens: list[str] = []
    buf: list[str] = []

    def flush():
        if buf:
            tokens.append("".join(buf))
            buf.clear()

    for ch in text:
        if ch.isspace():
            flush()
        elif cjk_char_tokens and _is_cjk(ch):
            flush()
            tokens.append(ch)
        else:
            buf.append(ch)
    flush()
    return tokens


def _token_f1(pred: list[str], gold: list[str]) -> float:
    common = Counter(pred) & Counter(gold)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(gold)
    return 2 * precision * recall / (precision + recall)


def text_match(response: str, gold: str, config: MatchConfig = MatchConfig()) -> float:
    """Score a response against the gold answer, in [0, 1].

    token_f1 compares token multisets; exact_match compares normalized
    strings; max_of_both takes the larger. An empty normalized response
    scores 0. Raises if the gold answer normalizes to nothing, since no
    label can be derived from it.
    """
    norm_gold = normalize(gold)
    if not norm_gold:
        raise EmptyGoldError(f"gold answer {gold!r} is empty after normalization")
    norm_resp = normalize(response)
    if not norm_resp:
        return 0.0

    def f1() -> float:
        return _token_f1(
            tokenize(norm_resp, config.cjk_char_tokens),
            tokenize(norm_gold, config.cjk_char_tokens),
        )

    def em() -> float:
        return 1.0 if norm_resp == norm_gold else 0.0

    if config.mode == "token_f1":
        return f1()
    if config.mode == "exact_match":
        return em()
    return max(f1(), em())


def build_labels(
    queries: Sequence[tuple[str, str, Optional[str]]],
    responses: Sequence[ResponseRecord],
    registry: ToolRegistry,
    config: MatchConfig = MatchConfig(),
    drop_missing: bool = False,
) -> list[LabeledQuery]:
    """Join queries with per-tool responses and score each pair.

    ``queries`` is a sequence of (id, query, gold) triples. A registered tool
    without a response for a query labels as 0 and logs a warning; with
    ``drop_missing`` the whole query is dropped instead (strict ingestion).
    """
    qindex: dict[str, tuple[str, Optional[str]]] = {}
    for qid, qtext, gold in queries:
        if qid in qindex:
            raise DataError(f"duplicate query id {qid!r}")
        qindex[qid] = (qtext, gold)

    by_pair: dict[tuple[str, str], str] = {}
    for rec in responses:
        if rec.query_id not in qindex:
            raise DataError(f"response references unknown query {rec.query_id!r}")
        if rec.tool_id not in registry:
            raise DataError(f"response references unknown tool {rec.tool_id!r}")
        key = (rec.query_id, rec.tool_id)
        if key in by_pair:
            raise DuplicateResponseError(
                f"more than one response for query {rec.query_id!r} and tool {rec.tool_id!r}"
            )
        by_pair[key] = rec.response

    out: list[LabeledQuery] = []
    for qid, (qtext, gold) in qindex.items():
        if gold is None or not normalize(gold):
            raise EmptyGoldError(f"query {qid!r} has no usable gold answer")
        labels: dict[str, float] = {}
        missing: list[str] = []
        for tid in registry.ids:
            resp = by_pair.get((qid, tid))
            if resp is None:
                missing.append(tid)
                labels[tid] = 0.0
            else:
                labels[tid] = text_match(resp, gold, config)
        if missing:
            if drop_missing:
                logger.info("dropping query %s: no response for %s", qid, ", ".join(missing))
                continue
            logger.warning(
                "query %s has no response for %s; labeling those 0", qid, ", ".join(missing)
            )
        out.append(LabeledQuery(id=qid, query=qtext, labels=labels, gold=gold))
    return out
