"""Caption scoring: exact-match unigram METEOR and embedding cosine similarity.

The METEOR stage here is the deterministic exact-match core: unigrams match
iff the lowercased tokens are identical (no stemming or synonymy). Among
all maximum matchings it finds one with the fewest chunks, where a chunk is
a run of matches adjacent in both sentences, then applies the classic
fragmentation penalty. Parameters are the canonical published constants:
recall weighted 9:1 against precision, penalty 0.5 * (chunks / matches)^3.
"""

from __future__ import annotations

import string
from collections import Counter
from functools import lru_cache

import numpy as np

MAX_TOKENS = 50

_PUNCT = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip ASCII punctuation from token ends."""
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


def _check_tokens(tokens, what: str) -> tuple[str, ...]:
    toks = tuple(tokens)
    if any(not t for t in toks):
        raise ValueError(f"{what} contains an empty token")
    if len(toks) > MAX_TOKENS:
        raise ValueError(f"{what} exceeds the {MAX_TOKENS}-token cap ({len(toks)} tokens)")
    return toks


def match_stats(hypothesis, reference) -> tuple[int, int]:
    """Return (matches, chunks) for one hypothesis/reference pair.

    ``matches`` is the maximum-matching size: per distinct token, the
    smaller of its two occurrence counts. ``chunks`` is the minimum chunk
    count over every maximum matching, found by a memoized scan over
    hypothesis positions; duplicate tokens make this exponential in the
    worst case, which the token cap keeps acceptable for captions.
    """
    hyp = _check_tokens(hypothesis, "hypothesis")
    ref = _check_tokens(reference, "reference")
    hyp_counts = Counter(hyp)
    ref_counts = Counter(ref)
    needed = {t: min(hyp_counts[t], c) for t, c in ref_counts.items() if t in hyp_counts}
    m = sum(needed.values())
    if m == 0:
        return 0, 0

    ref_positions = {t: tuple(j for j, r in enumerate(ref) if r == t) for t in needed}
    # hyp occurrences of token t at or after position i, for skip feasibility
    remaining_occ = [Counter() for _ in range(len(hyp) + 1)]
    for i in range(len(hyp) - 1, -1, -1):
        remaining_occ[i] = remaining_occ[i + 1].copy()
        remaining_occ[i][hyp[i]] += 1

    @lru_cache(maxsize=None)
    def best(i: int, prev_j: int, used: frozenset) -> float:
        if i == len(hyp):
            return 0.0 if len(used) == m else np.inf
        tok = hyp[i]
        quota = needed.get(tok, 0) - sum(1 for j in used if ref[j] == tok)
        options = []
        # skip this position only if later occurrences can still cover the quota
        if quota <= remaining_occ[i + 1][tok]:
            options.append(best(i + 1, -1, used))
        if quota > 0:
            for j in ref_positions[tok]:
                if j in used:
                    continue
                step = 0.0 if j == prev_j + 1 and prev_j >= 0 else 1.0
                options.append(step + best(i + 1, j, used | {j}))
        return min(options) if options else np.inf

    chunks = best(0, -2, frozenset())
    best.cache_clear()
    if not np.isfinite(chunks):
        raise RuntimeError("chunk search failed to realize a maximum matching")
    return m, int(chunks)


def _meteor_single(hyp: tuple[str, ...], ref: tuple[str, ...]) -> float:
    m, chunks = match_stats(hyp, ref)
    if m == 0:
        return 0.0
    precision = m / len(hyp)
    recall = m / len(ref)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def meteor(hypothesis, references) -> float:
    """Exact-match unigram METEOR: maximum score over the references."""
    hyp = _check_tokens(hypothesis, "hypothesis")
    if not hyp:
        raise ValueError("hypothesis is empty")
    refs = [_check_tokens(r, "reference") for r in references]
    if not refs:
        raise ValueError("need at least one reference")
    return max(_meteor_single(hyp, ref) for ref in refs)


def cosine_similarity(a, b) -> float:
    """a . b / (||a|| ||b||) for two nonzero vectors of equal length."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(np.dot(a, b) / (na * nb))


def corpus_mean(scores) -> float:
    scores = list(scores)
    if not scores:
        raise ValueError("cannot average an empty score list")
    return float(np.mean(scores))
