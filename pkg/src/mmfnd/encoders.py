"""Unimodal feature encoders.

The text path emulates a pretrained sentence encoder at desk scale: a
mean pool over trainable token embeddings followed by a linear
projection. The image path linearly projects pre-extracted feature
vectors. Externally computed embeddings can be swapped in through a
JSONL file; the projection layers stay in place either way.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .tensor import Param, Tensor, matvec, mean_pool, take_rows

OOV_ID = 0

_TOKEN_RE = re.compile(r"\w+")


class EmptyTextError(ValueError):
    """Text contains no tokens after normalization."""


class EmbeddingFileError(ValueError):
    """Precomputed embedding file is malformed."""


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; punctuation and whitespace are separators."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TokenSequence:
    """Fixed-length id sequence; padded tail positions carry mask=False."""

    ids: list[int]
    mask: list[bool]

    def active_ids(self) -> list[int]:
        return [i for i, m in zip(self.ids, self.mask) if m]


class Vocabulary:
    """Deterministic token -> id table built from a training corpus.

    Ids are assigned in sorted token order starting at 1; id 0 is reserved
    for out-of-vocabulary tokens and padding.
    """

    def __init__(self, tokens: list[str]):
        self.tokens = list(tokens)
        self.id_of = {tok: i + 1 for i, tok in enumerate(self.tokens)}

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        seen = set()
        for text in texts:
            seen.update(tokenize(text))
        return cls(sorted(seen))

    def __len__(self) -> int:
        # embedding table size: all known tokens plus the OOV/pad row
        return len(self.tokens) + 1

    def encode(self, text: str, max_len: int = 64) -> TokenSequence:
        toks = tokenize(text)[:max_len]
        ids = [self.id_of.get(t, OOV_ID) for t in toks]
        n = len(ids)
        ids += [OOV_ID] * (max_len - n)
        mask = [True] * n + [False] * (max_len - n)
        return TokenSequence(ids=ids, mask=mask)


# ---------------------------------------------------------------------------
# encoder forward passes
# ---------------------------------------------------------------------------


def pooled_embedding(emb: Param, seq: TokenSequence) -> Tensor:
    """Mean of the embedding rows at the unmasked positions."""
    ids = seq.active_ids()
    if not ids:
        raise EmptyTextError("cannot encode an all-padding token sequence")
    return mean_pool(take_rows(emb, ids), axis=0)


def encode_text(emb: Param, w_tf: Param, seq: TokenSequence) -> Tensor:
    """Projected text feature from mean-pooled token embeddings."""
    return matvec(w_tf, pooled_embedding(emb, seq))


def encode_description(emb: Param, w_df: Param, seq: TokenSequence) -> Tensor:
    """One row of the description feature matrix; shares the token table."""
    return matvec(w_df, pooled_embedding(emb, seq))


def encode_image(w_vf: Param, img: Tensor) -> Tensor:
    """Projected image feature from a pre-extracted feature vector."""
    return matvec(w_vf, img)


# ---------------------------------------------------------------------------
# precomputed embedding files (JSONL)
# ---------------------------------------------------------------------------


@dataclass
class PrecomputedItem:
    """Externally computed vectors that bypass the toy encoders."""

    image_vec: np.ndarray
    text_vec: np.ndarray | None = None
    desc_vecs: list[np.ndarray] = field(default_factory=list)


def _as_float_vector(value, line_no: int, name: str) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
        raise EmbeddingFileError(f"line {line_no}: field {name!r} must be a list of numbers")
    return np.asarray(value, dtype=np.float64)


def load_precomputed(path) -> dict[str, PrecomputedItem]:
    """Read an embedding file: one JSON object per line.

    Schema per line: {"id": str, "image_vec": [...], "text_vec": [...]?,
    "desc_vecs": [[...], ...]?}. Vector widths must be consistent across
    the whole file.
    """
    items: dict[str, PrecomputedItem] = {}
    dims: dict[str, int] = {}

    def check_dim(kind: str, vec: np.ndarray, line_no: int) -> None:
        if kind not in dims:
            dims[kind] = vec.shape[0]
        elif dims[kind] != vec.shape[0]:
            raise EmbeddingFileError(
                f"line {line_no}: {kind} has length {vec.shape[0]}, expected {dims[kind]}"
            )

    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EmbeddingFileError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise EmbeddingFileError(f"line {line_no}: expected a JSON object")
            for required in ("id", "image_vec"):
                if required not in obj:
                    raise EmbeddingFileError(f"line {line_no}: missing field {required!r}")
            item_id = obj["id"]
            if not isinstance(item_id, str):
                raise EmbeddingFileError(f"line {line_no}: field 'id' must be a string")
            if item_id in items:
                raise EmbeddingFileError(f"line {line_no}: duplicate id {item_id!r}")
            image_vec = _as_float_vector(obj["image_vec"], line_no, "image_vec")
            check_dim("image_vec", image_vec, line_no)
            text_vec = None
            if obj.get("text_vec") is not None:
                text_vec = _as_float_vector(obj["text_vec"], line_no, "text_vec")
                check_dim("text_vec", text_vec, line_no)
            desc_vecs = []
            if obj.get("desc_vecs") is not None:
                if not isinstance(obj["desc_vecs"], list):
                    raise EmbeddingFileError(f"line {line_no}: field 'desc_vecs' must be a list")
                for row in obj["desc_vecs"]:
                    vec = _as_float_vector(row, line_no, "desc_vecs")
                    check_dim("desc_vecs", vec, line_no)
                    desc_vecs.append(vec)
            items[item_id] = PrecomputedItem(image_vec=image_vec, text_vec=text_vec, desc_vecs=desc_vecs)
    return items


def write_precomputed(path, items: dict[str, PrecomputedItem]) -> None:
    """Inverse of load_precomputed; floats round-trip exactly through JSON."""
    with open(path, "w", encoding="utf-8") as fh:
        for item_id, item in items.items():
            obj = {"id": item_id, "image_vec": item.image_vec.tolist()}
            if item.text_vec is not None:
                obj["text_vec"] = item.text_vec.tolist()
            if item.desc_vecs:
                obj["desc_vecs"] = [v.tolist() for v in item.desc_vecs]
            fh.write(json.dumps(obj) + "\n")
