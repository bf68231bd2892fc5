"""Answer normalization, token F1 and exact match (HotpotQA conventions)."""

from __future__ import annotations

import re
import string
from collections import Counter
from typing import NamedTuple

_PUNCT = set(string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")
_SPECIAL = ("yes", "no", "noanswer")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and the articles a/an/the, collapse whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


class F1(NamedTuple):
    f1: float
    precision: float
    recall: float


_ZERO = F1(0.0, 0.0, 0.0)


def f1_score(predicted: str, gold: str) -> F1:
    """Token-multiset F1 between normalized answers.

    As in the official HotpotQA scorer, a yes/no/noanswer on either side
    scores zero unless both normalize identically. Two answers that both
    normalize to the empty string score 1.
    """
    pred, ref = normalize_answer(predicted), normalize_answer(gold)
    if not pred and not ref:
        return F1(1.0, 1.0, 1.0)
    if (pred in _SPECIAL or ref in _SPECIAL) and pred != ref:
        return _ZERO
    pred_toks, ref_toks = pred.split(), ref.split()
    same = sum((Counter(pred_toks) & Counter(ref_toks)).values())
    if same == 0:
        return _ZERO
    precision = same / len(pred_toks)
    recall = same / len(ref_toks)
    return F1(2 * precision * recall / (precision + recall), precision, recall)


def yes_no(predicted: str) -> str | None:
    """Map a free-form reply to "yes"/"no" by its leading token, else None."""
    toks = normalize_answer(predicted).split()
    if toks and toks[0] in ("yes", "no"):
        return toks[0]
    return None


def exact_match(predicted: str, gold: str, dataset: str | None = None) -> bool:
    if dataset == "strategyqa":
        mapped = yes_no(predicted)
        return mapped is not None and mapped == normalize_answer(gold)
    return normalize_answer(predicted) == normalize_answer(gold)
