"""Reference-based text metrics: token LCS F1, unigram alignment with a
fragmentation penalty, and greedy embedding-match F1.

All three share one tokenizer and degrade to 0.0 on empty input rather than
raising, so a bad generation never aborts an evaluation run.
"""

from __future__ import annotations

import logging
import re
from typing import Sequence

import numpy as np

from ..backends import Embedder
from . import porter

logger = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase tokens split on runs of non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length via dynamic programming."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for token_a in a:
        cur = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f1(candidate: str, reference: str) -> float:
    """LCS-based F1 over tokens."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Two-stage unigram alignment: exact matches first, then stem matches
    among the leftovers. Each stage matches as many tokens as possible;
    matches extending the previous pair are preferred to keep runs long."""
    matched_ref = [False] * len(ref)
    by_cand: dict[int, int] = {}
    for stage_key in (lambda w: w, porter.stem):
        ref_keys = [stage_key(w) for w in ref]
        for ci, word in enumerate(cand):
            if ci in by_cand:
                continue
            key = stage_key(word)
            choice = None
            prev = by_cand.get(ci - 1)
            if prev is not None:
                nxt = prev + 1
                if nxt < len(ref) and not matched_ref[nxt] and ref_keys[nxt] == key:
                    choice = nxt
            if choice is None:
                choice = next(
                    (rj for rj in range(len(ref)) if not matched_ref[rj] and ref_keys[rj] == key),
                    None,
                )
            if choice is not None:
                matched_ref[choice] = True
                by_cand[ci] = choice
    return sorted(by_cand.items())


def _count_chunks(matches: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for ci, ri in matches:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor(candidate: str, reference: str) -> float:
    """Unigram precision/recall with a recall-weighted mean and a cubic
    fragmentation penalty over alignment chunks."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return 0.0
    matches = _align(cand, ref)
    m = len(matches)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (_count_chunks(matches) / m) ** 3
    return fmean * (1 - penalty)


def bertscore_f1(candidate: str, reference: str, token_embedder: Embedder) -> float:
    """Greedy maximum-cosine token matching, harmonic-mean F1.

    No idf weighting and no baseline rescaling; negative cosines clamp to 0
    before averaging, so the score stays in [0, 1].
    """
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        logger.warning("bertscore over an empty token list; returning 0.0")
        return 0.0
    cand_matrix = np.asarray(
        [v.values for v in token_embedder.embed_tokens(cand)], dtype=np.float64
    )
    ref_matrix = np.asarray(
        [v.values for v in token_embedder.embed_tokens(ref)], dtype=np.float64
    )
    cand_matrix /= np.linalg.norm(cand_matrix, axis=1, keepdims=True)
    ref_matrix /= np.linalg.norm(ref_matrix, axis=1, keepdims=True)
    similarity = np.clip(ref_matrix @ cand_matrix.T, 0.0, None)
    recall = float(similarity.max(axis=1).mean())
    precision = float(similarity.max(axis=0).mean())
    if precision + recall == 0.0:
        return 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return min(max(f1, 0.0), 1.0)
