"""Dataset ingestion and the deterministic synthetic corpus generator.

Synthetic items carry a latent topic vector z. The text encodes the sign
pattern of z through axis-and-polarity word lists, the image feature is a
noisy linear mixture of z under a per-item scale nuisance, and each item
mentions named entities whose fixture descriptions are written in the
vocabulary of one (axis, polarity) cell. Real items keep text, image and
entity polarities consistent with z; fake items mix an independent topic
vector into the image and flip the mentioned entity polarities, so
veracity is exactly cross-channel consistency. Entity names are assigned
to cells independently of their wording: the polarity of a mention is
only recoverable through its description.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .enrich import first_sentence
from .errors import ConfigError, DataFormatError
from .rng import Rng

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("id", "text", "image_vec", "label")


@dataclass
class NewsItem:
    """One (text, image features, descriptions, label) record."""

    id: str
    text: str
    image: np.ndarray
    label: int
    entities: list[str] = field(default_factory=list)
    descriptions: list[str] = field(default_factory=list)


@dataclass
class Dataset:
    items: list[NewsItem]
    split: str
    provenance: str
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> list[int]:
        return [item.label for item in self.items]


# ---------------------------------------------------------------------------
# JSONL input/output
# ---------------------------------------------------------------------------


def load_jsonl(path, split: str = "train") -> Dataset:
    """Read one news item per line.

    Lines missing text, image features or a valid label are excluded with
    a warning (mirroring the usual multimodal preprocessing rule); broken
    JSON, wrong field types, duplicate ids and inconsistent image widths
    are hard errors naming the line.
    """
    items: list[NewsItem] = []
    seen_ids: set[str] = set()
    skipped = 0
    d_raw: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise DataFormatError(f"{path}: line {line_no}: expected a JSON object")
            missing = [
                name
                for name in REQUIRED_FIELDS
                if obj.get(name) is None or obj.get(name) == "" or obj.get(name) == []
            ]
            if missing:
                skipped += 1
                logger.warning("%s: line %d: skipping item (missing %s)", path, line_no, ", ".join(missing))
                continue
            label = obj["label"]
            if isinstance(label, bool) or label not in (0, 1):
                raise DataFormatError(f"{path}: line {line_no}: label must be 0 or 1")
            if not isinstance(obj["id"], str) or not isinstance(obj["text"], str):
                raise DataFormatError(f"{path}: line {line_no}: id and text must be strings")
            if obj["id"] in seen_ids:
                raise DataFormatError(f"{path}: line {line_no}: duplicate id {obj['id']!r}")
            seen_ids.add(obj["id"])
            try:
                image = np.asarray(obj["image_vec"], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}: line {line_no}: image_vec must be numeric") from exc
            if image.ndim != 1:
                raise DataFormatError(f"{path}: line {line_no}: image_vec must be a flat list")
            if d_raw is None:
                d_raw = image.shape[0]
            elif image.shape[0] != d_raw:
                raise DataFormatError(
                    f"{path}: line {line_no}: image_vec has length {image.shape[0]}, expected {d_raw}"
                )
            items.append(
                NewsItem(
                    id=obj["id"],
                    text=obj["text"],
                    image=image,
                    label=int(obj["label"]),
                    entities=list(obj.get("entities") or []),
                    descriptions=list(obj.get("desc_sentences") or []),
                )
            )
    if not items:
        raise DataFormatError(f"{path}: no usable items")
    return Dataset(items=items, split=split, provenance=str(path), skipped=skipped)


def save_jsonl(path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in dataset.items:
            obj = {
                "id": item.id,
                "text": item.text,
                "image_vec": item.image.tolist(),
                "label": item.label,
            }
            if item.entities:
                obj["entities"] = item.entities
            if item.descriptions:
                obj["desc_sentences"] = item.descriptions
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

_POS_STEMS = ("storm", "market", "league", "clinic", "orbit", "canyon", "ballot", "gallery")
_NEG_STEMS = ("harvest", "tunnel", "signal", "meadow", "anchor", "piston", "lantern", "quarry")

_COMMON_WORDS = (
    "the a an of and to in on for with as by at from into over after before "
    "near again report today local officials people sources said during new "
    "first last many few several area city region group plan update follow "
    "state major minor early late against between"
).split()

_ENTITY_FIRST = ("veltor", "casmun", "dorlin", "quenby", "marsa", "tilvane", "orrek", "zefia")
_ENTITY_SECOND = ("ridge", "hall", "bridge", "garden", "station", "archive", "harbor", "tower")


@dataclass
class SynthConfig:
    n_train: int = 2000
    n_test: int = 500
    seed: int = 42
    z_dim: int = 3
    d_raw: int = 128
    words_per_list: int = 8
    entities_per_cell: int = 32
    text_len: tuple[int, int] = (24, 36)
    entities_range: tuple[int, int] = (2, 3)
    topic_word_rate: float = 0.8
    image_noise: float = 0.4
    noisy_image_rate: float = 0.15
    noisy_image_boost: float = 2.0
    image_scale_range: tuple[float, float] = (0.6, 1.8)

    def validate(self) -> None:
        if self.n_train < 10 or self.n_test < 10:
            raise ConfigError("synthetic splits need at least 10 items each")
        if not (1 <= self.z_dim <= len(_POS_STEMS)):
            raise ConfigError(f"z_dim must lie in 1..{len(_POS_STEMS)}")
        if self.entities_range[0] < 0 or self.entities_range[1] > self.z_dim:
            raise ConfigError("entities_range must fit inside the topic axes")


@dataclass
class SynthArtifacts:
    train: Dataset
    test: Dataset
    gazetteer: list[str]
    summaries: dict[str, str]
    # topic_words[axis][polarity] with polarity 0 = positive, 1 = negative
    topic_words: list[tuple[list[str], list[str]]]
    mixing: np.ndarray
    config: SynthConfig


def _topic_vocab(cfg: SynthConfig) -> list[tuple[list[str], list[str]]]:
    return [
        (
            [f"{_POS_STEMS[k]}{j}" for j in range(cfg.words_per_list)],
            [f"{_NEG_STEMS[k]}{j}" for j in range(cfg.words_per_list)],
        )
        for k in range(cfg.z_dim)
    ]


def _entities(cfg: SynthConfig, rng: Rng) -> tuple[list[str], dict[str, tuple[int, int]]]:
    """Unique entity titles, shuffled onto (axis, polarity) cells.

    The shuffle keeps title wording independent of the cell, so a mention
    reveals its polarity only through the entity's description.
    """
    n_cells = cfg.z_dim * 2
    pool = [
        f"{first.title()} {second.title()} {i}"
        for i in range(1 + (n_cells * cfg.entities_per_cell - 1) // (len(_ENTITY_FIRST) * len(_ENTITY_SECOND)))
        for first in _ENTITY_FIRST
        for second in _ENTITY_SECOND
    ]
    order = rng.stream("entity-assign").permutation(len(pool))
    titles, cell_of = [], {}
    for slot in range(n_cells * cfg.entities_per_cell):
        title = pool[int(order[slot])]
        titles.append(title)
        cell_of[title] = (slot % n_cells // 2, slot % 2)  # (axis, polarity)
    return sorted(titles), cell_of


def _summary_for(title: str, axis: int, polarity: int, topic_words, gen) -> str:
    words = topic_words[axis][polarity]
    picks = [words[int(i)] for i in gen.integers(0, len(words), size=3)]
    return (
        f"{title} is a widely covered {picks[0]} {picks[1]} landmark. "
        f"It appears in {picks[2]} reports every season."
    )


def _polarity(value: float) -> int:
    return 0 if value >= 0 else 1


def _make_item(
    idx: int, split: str, cfg: SynthConfig, rng: Rng, topic_words, by_cell,
    summaries, mixing, label: int,
) -> NewsItem:
    gen = rng.stream("item", split, idx)
    z = gen.normal(size=cfg.z_dim)

    # text: axis words encode the sign pattern of z; axes cycle in a random
    # order so every axis gets roughly even coverage
    n_tok = int(gen.integers(cfg.text_len[0], cfg.text_len[1] + 1))
    axis_cycle = [int(a) for a in gen.permutation(cfg.z_dim)]
    tokens, cursor = [], 0
    for _ in range(n_tok):
        if gen.random() < cfg.topic_word_rate:
            axis = axis_cycle[cursor % cfg.z_dim]
            cursor += 1
            words = topic_words[axis][_polarity(z[axis])]
            tokens.append(words[int(gen.integers(len(words)))])
        else:
            tokens.append(_COMMON_WORDS[int(gen.integers(len(_COMMON_WORDS)))])

    # entity mentions: polarity matches the text for real news, is flipped
    # for fake news; descriptions carry the mentioned cell's vocabulary
    n_e = int(gen.integers(cfg.entities_range[0], cfg.entities_range[1] + 1))
    mentions = []
    if n_e > 0:
        axes = [int(a) for a in gen.choice(cfg.z_dim, size=n_e, replace=False)]
        for axis in axes:
            polarity = _polarity(z[axis])
            if label == 1:
                polarity = 1 - polarity
            pool = by_cell[(axis, polarity)]
            mentions.append(pool[int(gen.integers(len(pool)))])
    for title in mentions:
        pos = int(gen.integers(0, len(tokens) + 1))
        tokens.insert(pos, title)
    text = " ".join(tokens)

    # image: mixture of the item's topic vector for real news; fake news
    # resamples magnitudes and flips the sign on at least half the axes,
    # so the image sign pattern always contradicts the text
    if label == 0:
        z_img = z
    else:
        magnitudes = np.abs(gen.normal(size=cfg.z_dim))
        signs = np.sign(z) + (z == 0)
        n_flip = int(gen.integers(max(1, cfg.z_dim // 2), cfg.z_dim + 1))
        flip = gen.choice(cfg.z_dim, size=n_flip, replace=False)
        signs[flip] *= -1.0
        z_img = signs * magnitudes
    sigma = cfg.image_noise
    if gen.random() < cfg.noisy_image_rate:
        sigma *= cfg.noisy_image_boost
    lo, hi = cfg.image_scale_range
    image_scale = float(np.exp(gen.uniform(np.log(lo), np.log(hi))))
    image = image_scale * (mixing @ z_img + sigma * gen.normal(size=cfg.d_raw))

    return NewsItem(
        id=f"{split}-{idx:05d}",
        text=text,
        image=image,
        label=label,
        entities=mentions,
        descriptions=[first_sentence(summaries[m]) for m in mentions],
    )


def synth_generate(n_train: int, n_test: int, seed: int, **overrides) -> SynthArtifacts:
    """Deterministic synthetic corpus; identical seeds give identical bytes."""
    cfg = SynthConfig(n_train=n_train, n_test=n_test, seed=seed, **overrides)
    cfg.validate()
    rng = Rng(cfg.seed)
    topic_words = _topic_vocab(cfg)
    titles, cell_of = _entities(cfg, rng)
    by_cell: dict[tuple[int, int], list[str]] = {}
    for title in titles:
        by_cell.setdefault(cell_of[title], []).append(title)
    summaries = {
        title: _summary_for(title, *cell_of[title], topic_words, rng.stream("summary", title))
        for title in titles
    }
    mixing = rng.stream("mixing").normal(size=(cfg.d_raw, cfg.z_dim)) / np.sqrt(cfg.z_dim)

    def build_split(split: str, n: int) -> Dataset:
        labels = np.array([0, 1] * (n // 2) + [0] * (n % 2))
        labels = labels[rng.stream("labels", split).permutation(n)]
        items = [
            _make_item(
                i, split, cfg, rng, topic_words, by_cell, summaries, mixing, int(labels[i])
            )
            for i in range(n)
        ]
        return Dataset(
            items=items, split=split,
            provenance=f"synthetic seed={cfg.seed} n={n} split={split}",
        )

    return SynthArtifacts(
        train=build_split("train", cfg.n_train),
        test=build_split("test", cfg.n_test),
        gazetteer=titles,
        summaries=summaries,
        topic_words=topic_words,
        mixing=mixing,
        config=cfg,
    )
