"""Log message pipeline: template mining, token normalization, embedding.

Messages are clustered into templates by a fixed-depth parse tree (length
level, then the first token, then similarity matching at the leaf), with
variable positions masked by ``<*>``.  Template tokens are normalized and
embedded by signed feature hashing into a fixed dimension, and a node's
log sequence is deduplicated by template and sum-pooled per channel.

Everything here is deterministic: the token hash is a fixed 64-bit
blake2b digest, so identical inputs produce bitwise-identical vectors
across runs and platforms.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

WILDCARD = "<*>"

_TOKEN_SPLIT = re.compile(r"[\s,]+")
_NUMBER = re.compile(r"\d+(?:\.\d+)?")
_NON_VERBAL = re.compile(r"[0-9\W_]+", re.ASCII)

# Fixed English stop-word list, versioned with the code for reproducibility.
STOP_WORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not now of off on once only or other our ours ourselves out over own same
she should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what when
where which while who whom why will with you your yours yourself yourselves
""".split())


def tokenize(message: str) -> list[str]:
    """Split on whitespace/commas and mask pure-number tokens to the wildcard."""
    tokens = [t for t in _TOKEN_SPLIT.split(message.strip()) if t != ""]
    return [WILDCARD if _NUMBER.fullmatch(t) else t for t in tokens]


@dataclass
class LogTemplate:
    """Constant skeleton of a message family; variable positions are ``<*>``."""

    template_id: int
    tokens: list[str]


class TemplateStore:
    """Fixed-depth parse tree that mines log templates incrementally.

    Tree levels: root -> token count -> first ``depth - 3`` tokens -> leaf
    cluster list.  A message merges into the best leaf template whose
    token-wise similarity reaches ``sim_threshold``, otherwise it founds a
    new template.  Template ids are stable for a given input order, and
    mining never deletes an existing template.
    """

    _SHORT_KEY = "\x00"  # key for messages shorter than a token level

    def __init__(self, depth: int = 4, sim_threshold: float = 0.5):
        if depth < 4:
            raise ValueError("depth must be >= 4 (root, length, token, leaf)")
        if not 0.0 < sim_threshold <= 1.0:
            raise ValueError("sim_threshold must be in (0, 1]")
        self.depth = depth
        self.sim_threshold = sim_threshold
        self.templates: list[LogTemplate] = []
        self._tree: dict = {}

    @property
    def _token_levels(self) -> int:
        return self.depth - 3

    def _leaf_for(self, tokens: list[str]) -> list[int]:
        node = self._tree.setdefault(len(tokens), {})
        for level in range(self._token_levels):
            key = tokens[level] if level < len(tokens) else self._SHORT_KEY
            node = node.setdefault(key, {})
        return node.setdefault("leaf", [])

    def mine(self, message: str) -> int:
        """Match ``message`` to a template, creating or merging as needed."""
        tokens = tokenize(message)
        if not tokens:
            raise ValueError("cannot mine an empty message")
        leaf = self._leaf_for(tokens)

        best_id, best_sim = None, 0.0
        for tid in leaf:
            existing = self.templates[tid].tokens
            sim = sum(1 for a, b in zip(existing, tokens) if a == b) / len(tokens)
            if sim >= self.sim_threshold and sim > best_sim:
                best_id, best_sim = tid, sim

        if best_id is None:
            tid = len(self.templates)
            self.templates.append(LogTemplate(tid, list(tokens)))
            leaf.append(tid)
            return tid

        existing = self.templates[best_id].tokens
        merged = [a if a == b else WILDCARD for a, b in zip(existing, tokens)]
        self.templates[best_id].tokens = merged
        return best_id

    def match(self, message: str):
        """Best existing template for ``message``, without mutating the store.

        Returns ``(template_id, tokens)``; an unmatched message comes back
        as ``(None, its own tokens)``.  This is the inference path: scoring
        one trace must not depend on which traces were scored before it.
        """
        tokens = tokenize(message)
        if not tokens:
            raise ValueError("cannot match an empty message")
        node = self._tree.get(len(tokens))
        for level in range(self._token_levels):
            if node is None:
                break
            key = tokens[level] if level < len(tokens) else self._SHORT_KEY
            node = node.get(key)
        leaf = [] if node is None else node.get("leaf", [])

        best_id, best_sim = None, 0.0
        for tid in leaf:
            existing = self.templates[tid].tokens
            sim = sum(1 for a, b in zip(existing, tokens) if a == b) / len(tokens)
            if sim >= self.sim_threshold and sim > best_sim:
                best_id, best_sim = tid, sim
        if best_id is None:
            return None, tokens
        return best_id, list(self.templates[best_id].tokens)

    def copy(self) -> "TemplateStore":
        """Deep copy; lets inference extend the store without mutating it."""
        return TemplateStore.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "sim_threshold": self.sim_threshold,
            "templates": [list(t.tokens) for t in self.templates],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TemplateStore":
        store = cls(depth=data["depth"], sim_threshold=data["sim_threshold"])
        # Re-inserting templates in id order rebuilds an equivalent tree:
        # leaf members always share their key-position tokens, so merging
        # never rewrites a tree key.
        for tokens in data["templates"]:
            tid = len(store.templates)
            store.templates.append(LogTemplate(tid, list(tokens)))
            store._leaf_for(list(tokens)).append(tid)
        return store


def normalize_tokens(tokens) -> list[str]:
    """Lowercase and drop wildcards, pure punctuation/numbers, and stop words."""
    out = []
    for token in tokens:
        if token == WILDCARD:
            continue
        lowered = token.lower()
        if _NON_VERBAL.fullmatch(lowered):
            continue
        if lowered in STOP_WORDS:
            continue
        out.append(lowered)
    return out


def token_hash(token: str) -> int:
    """Fixed 64-bit hash of a token (stable across runs and platforms)."""
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def embed_sentence(tokens, d_log: int) -> np.ndarray:
    """Signed feature-hashing bag-of-tokens embedding, L2-normalized.

    Each token is hashed to an index in [0, d_log) and a sign; signed
    counts are accumulated and the result normalized unless all-zero.
    """
    if d_log < 8:
        raise ValueError("d_log must be >= 8")
    vec = np.zeros(d_log, dtype=np.float64)
    for token in tokens:
        h = token_hash(token)
        idx = h % d_log
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[idx] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def embed_log_sequence(records, channel: str, d_log: int,
                       store: TemplateStore, update: bool = True) -> np.ndarray:
    """Embed one node's log records of one channel into a single vector.

    Records resolve to templates, are deduplicated per template, and the
    per-template sentence vectors are sum-pooled.  With ``update`` the
    store mines (training); without, it only matches, and unmatched
    messages embed as their own one-off templates.  Empty input yields
    the zero vector.
    """
    seen: set = set()
    for record in records:
        if record.stream != channel:
            raise ValueError(f"record stream '{record.stream}' does not match "
                             f"channel '{channel}'")
        if update:
            seen.add((0, store.mine(record.message)))
        else:
            tid, tokens = store.match(record.message)
            seen.add((1, tuple(tokens)) if tid is None else (0, tid))
    vec = np.zeros(d_log, dtype=np.float64)
    for kind, value in sorted(seen):
        tokens = store.templates[value].tokens if kind == 0 else list(value)
        vec += embed_sentence(normalize_tokens(tokens), d_log)
    return vec


def dump_templates(store: TemplateStore, path) -> None:
    """Write templates as TSV (template_id, space-joined tokens) for debugging."""
    from .fileio import atomic_write_text

    lines = [f"{t.template_id}\t{' '.join(t.tokens)}" for t in store.templates]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
