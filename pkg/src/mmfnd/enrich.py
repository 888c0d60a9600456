"""External knowledge enrichment.

Concept entities are extracted from news text by longest-match lookup
against a gazetteer, their one-sentence encyclopedia descriptions are
retrieved (live HTTP, on-disk cache, or an offline fixture file), and the
description features are fused into the text feature through an attention
step plus additive projection.
"""

from __future__ import annotations

import json
import os
import re
import time
import urllib.parse
from dataclasses import dataclass
from pathlib import Path

from .tensor import (
    DegenerateInputError,
    Param,
    Tensor,
    add,
    matvec,
    mean_pool,
    scale_rows,
    softmax_vec,
)


@dataclass(frozen=True)
class Entity:
    """A gazetteer hit in a news text."""

    surface: str
    canonical_title: str
    span: tuple[int, int]


@dataclass(frozen=True)
class EntityDescription:
    """First sentence of an entity's encyclopedia summary."""

    entity: str
    sentence: str
    source: str  # live | cache | fixture


class CacheMissError(LookupError):
    """Offline lookup found neither a cache entry nor a fixture entry."""


class FetchError(RuntimeError):
    """Live retrieval kept failing after the configured retries."""


# ---------------------------------------------------------------------------
# entity extraction
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"\w+")


def _title_key(title: str) -> tuple[str, ...]:
    return tuple(_WORD_RE.findall(title.lower()))


def extract_entities(text: str, gazetteer) -> list[Entity]:
    """Greedy longest-match gazetteer scan, left to right.

    Matching is case-insensitive on word-token boundaries; overlapping
    candidates resolve to the longest, and repeated titles keep only the
    first mention.
    """
    by_first: dict[str, list[tuple[tuple[str, ...], str]]] = {}
    for title in gazetteer:
        key = _title_key(title)
        if not key:
            continue
        by_first.setdefault(key[0], []).append((key, title))
    for candidates in by_first.values():
        candidates.sort(key=lambda item: len(item[0]), reverse=True)

    words = [(m.group().lower(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]
    found: list[Entity] = []
    seen_titles = set()
    i = 0
    while i < len(words):
        tok = words[i][0]
        advanced = False
        for key, title in by_first.get(tok, ()):
            j = i + len(key)
            if j <= len(words) and tuple(w[0] for w in words[i:j]) == key:
                start, end = words[i][1], words[j - 1][2]
                if title not in seen_titles:
                    seen_titles.add(title)
                    found.append(Entity(surface=text[start:end], canonical_title=title, span=(start, end)))
                i = j
                advanced = True
                break
        if not advanced:
            i += 1
    return found


def load_gazetteer(path) -> list[str]:
    """One title per line, UTF-8; blank lines ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def write_gazetteer(path, titles) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for title in titles:
            fh.write(title + "\n")


# ---------------------------------------------------------------------------
# first-sentence splitting
# ---------------------------------------------------------------------------

# multi-letter abbreviations whose trailing dot does not end a sentence;
# single letters ("A.", the "U" and "S" in "U.S.") are guarded separately
_ABBREVIATIONS = {
    "mr", "mrs", "ms", "dr", "prof", "rev", "gen", "sen", "rep", "hon",
    "jr", "sr", "st", "no", "vs", "etc", "inc", "ltd", "co", "corp",
    "dept", "est", "fig", "approx", "ca", "cf", "al",
}

_TERMINATOR_RE = re.compile(r"[.!?](?=\s|$)")


def first_sentence(text: str) -> str:
    """Prefix up to and including the first sentence terminator.

    A '.' does not terminate after a known abbreviation or a single-letter
    initial; text without any terminator is returned whole.
    """
    if not text or not text.strip():
        raise DegenerateInputError("first_sentence of empty text")
    for match in _TERMINATOR_RE.finditer(text):
        if text[match.start()] == ".":
            j = match.start() - 1
            k = j
            while k >= 0 and (text[k].isalnum() or text[k] == "'"):
                k -= 1
            word = text[k + 1:match.start()]
            if len(word) == 1 and word.isalpha():
                continue
            if word.lower() in _ABBREVIATIONS:
                continue
        return text[:match.end()]
    return text


# ---------------------------------------------------------------------------
# description cache and retrieval
# ---------------------------------------------------------------------------


class DescriptionCache:
    """One JSON file per title under a cache directory; writes are atomic."""

    def __init__(self, root):
        self.root = Path(root)

    def _path(self, title: str) -> Path:
        return self.root / (urllib.parse.quote(title, safe="") + ".json")

    def get(self, title: str) -> str | None:
        path = self._path(title)
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)["sentence"]

    def put(self, title: str, sentence: str) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self._path(title)
        tmp = path.with_suffix(".json.tmp")
        payload = {"title": title, "sentence": sentence, "fetched_at": time.time()}
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def __contains__(self, title: str) -> bool:
        return self._path(title).exists()


def load_fixture(path) -> dict[str, str]:
    """Fixture summaries: JSON lines of {"title": ..., "summary": ...}."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[obj["title"]] = obj["summary"]
    return out


def requests_transport(url: str, headers: dict, timeout: float) -> tuple[int, bytes]:
    import requests

    resp = requests.get(url, headers=headers, timeout=timeout)
    return resp.status_code, resp.content


DEFAULT_BASE_URL = "https://en.wikipedia.org"
DEFAULT_USER_AGENT = "mmfnd/0.1 (multimodal news verification research)"


class WikiClient:
    """Entity-description retrieval against the REST page-summary endpoint.

    The HTTP transport is injectable so tests can count or fake network
    traffic; live requests are rate limited and retried with exponential
    backoff. All successful lookups land in the on-disk cache.
    """

    def __init__(
        self,
        cache: DescriptionCache,
        *,
        base_url: str = DEFAULT_BASE_URL,
        fixture: dict[str, str] | None = None,
        transport=None,
        user_agent: str = DEFAULT_USER_AGENT,
        max_retries: int = 3,
        min_interval: float = 0.1,
        timeout: float = 10.0,
        sleep=time.sleep,
        clock=time.monotonic,
    ):
        self.cache = cache
        self.base_url = base_url.rstrip("/")
        self.fixture = fixture or {}
        self.transport = transport or requests_transport
        self.user_agent = user_agent
        self.max_retries = max_retries
        self.min_interval = min_interval
        self.timeout = timeout
        self._sleep = sleep
        self._clock = clock
        self._last_request: float | None = None

    def summary_url(self, title: str) -> str:
        return f"{self.base_url}/api/rest_v1/page/summary/{urllib.parse.quote(title, safe='')}"

    def fetch_description(self, entity, mode: str = "offline") -> EntityDescription | None:
        """Resolve one entity; returns None when the title has no page."""
        if mode not in ("live", "offline"):
            raise ValueError(f"unknown fetch mode {mode!r}")
        title = entity.canonical_title if isinstance(entity, Entity) else entity
        cached = self.cache.get(title)
        if cached is not None:
            return EntityDescription(entity=title, sentence=cached, source="cache")
        if mode == "offline":
            if title in self.fixture:
                sentence = first_sentence(self.fixture[title])
                self.cache.put(title, sentence)
                return EntityDescription(entity=title, sentence=sentence, source="fixture")
            raise CacheMissError(f"no cached or fixture description for {title!r}")
        return self._fetch_live(title)

    def _fetch_live(self, title: str) -> EntityDescription | None:
        url = self.summary_url(title)
        headers = {"User-Agent": self.user_agent, "Accept": "application/json"}
        last_error: str = ""
        for attempt in range(self.max_retries):
            if attempt > 0:
                self._sleep(0.5 * 2 ** (attempt - 1))
            self._throttle()
            try:
                status, body = self.transport(url, headers, self.timeout)
            except Exception as exc:  # network-level failure: retry
                last_error = str(exc)
                continue
            if status == 404:
                return None
            if status != 200:
                last_error = f"HTTP {status}"
                continue
            try:
                extract = json.loads(body.decode("utf-8"))["extract"]
            except (ValueError, KeyError, UnicodeDecodeError) as exc:
                raise FetchError(f"unparseable summary response for {title!r}: {exc}") from exc
            sentence = first_sentence(extract)
            self.cache.put(title, sentence)
            return EntityDescription(entity=title, sentence=sentence, source="live")
        raise FetchError(f"failed to fetch {title!r} after {self.max_retries} attempts: {last_error}")

    def _throttle(self) -> None:
        now = self._clock()
        if self._last_request is not None:
            wait = self.min_interval - (now - self._last_request)
            if wait > 0:
                self._sleep(wait)
        self._last_request = self._clock()


# ---------------------------------------------------------------------------
# attention-based information fusion
# ---------------------------------------------------------------------------


def description_attention(r_t: Tensor, m_d: Tensor) -> Tensor:
    """Distribution over descriptions from their dot products with the text."""
    return softmax_vec(matvec(m_d, r_t))


def enhance(r_t: Tensor, m_d: Tensor | None, w_t: Param, w_d: Param) -> Tensor:
    """Knowledge-enhanced text feature.

    Description rows are weighted by attention against the text feature,
    mean-pooled, projected, and added to the projected text feature. With
    no descriptions the text projection alone is returned.
    """
    base = matvec(w_t, r_t)
    if m_d is None or m_d.data.shape[0] == 0:
        return base
    att = description_attention(r_t, m_d)
    pooled = mean_pool(scale_rows(m_d, att), axis=0)
    return add(base, matvec(w_d, pooled))
