"""Parsing of raw post and physical-event records into validated batches.

Posts arrive as newline-delimited JSON records; events arrive as CSV with a
header row. Malformed post records are never dropped silently: each one
becomes a :class:`Reject` naming the line and the offending field.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from datetime import date, datetime, timezone
from typing import IO, Iterable, Iterator
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

POST_FIELDS = ("id", "author_id", "timestamp", "text", "repost_of", "reply_to", "quote_of", "urls")

# Query parameters that carry tracking state, not content identity.
TRACKING_PARAMS = ("fbclid", "gclid")
TRACKING_PREFIXES = ("utm_",)

URL_RE = re.compile(r"https?://[^\s<>\"')\]]+", re.IGNORECASE)

PARSE_BATCH_SIZE = 10_000


@dataclass(frozen=True, slots=True)
class Post:
    post_id: str
    author_id: str
    timestamp: datetime
    text: str
    repost_of: str | None = None
    reply_to: str | None = None
    quote_of: str | None = None
    urls: tuple[str, ...] = ()


@dataclass(frozen=True, slots=True)
class EventRecord:
    date: date
    event_type: str
    count: int


@dataclass(frozen=True, slots=True)
class DomainRef:
    """A cited URL reduced to its normalized form and owning host."""

    url: str
    host: str


@dataclass(frozen=True, slots=True)
class Reject:
    line_no: int
    field: str
    reason: str


class StreamError(RuntimeError):
    """Raised when the input stream itself cannot be read."""


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant to UTC, truncated to whole seconds."""
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def normalize_url(raw: str) -> DomainRef | None:
    """Normalize one http(s) URL, or None if it does not parse as one.

    Lowercases scheme and host, strips tracking query parameters and the
    fragment-free remainder is preserved verbatim. The host drops any port
    and a leading "www." so that mirrors of one portal collapse together.
    """
    candidate = raw.strip().rstrip(".,;:!?")
    try:
        parts = urlsplit(candidate)
    except ValueError:
        return None
    if parts.scheme.lower() not in ("http", "https") or not parts.netloc:
        return None
    host = parts.hostname
    if not host or "." not in host:
        return None
    host = host.lower()
    netloc = host
    kept = [
        (k, v)
        for k, v in parse_qsl(parts.query, keep_blank_values=True)
        if k.lower() not in TRACKING_PARAMS
        and not k.lower().startswith(TRACKING_PREFIXES)
    ]
    query = urlencode(kept)
    url = urlunsplit((parts.scheme.lower(), netloc, parts.path, query, ""))
    display_host = host[4:] if host.startswith("www.") and host.count(".") >= 2 else host
    return DomainRef(url=url, host=display_host)


def extract_urls(post: Post) -> list[DomainRef]:
    """All distinct normalized URLs cited by a post (text plus urls field)."""
    refs: list[DomainRef] = []
    seen: set[str] = set()
    for raw in list(URL_RE.findall(post.text)) + list(post.urls):
        ref = normalize_url(raw)
        if ref is not None and ref.url not in seen:
            seen.add(ref.url)
            refs.append(ref)
    return refs


def _optional_str(record: dict, key: str) -> str | None:
    value = record.get(key)
    if value is None or value == "":
        return None
    if not isinstance(value, str):
        raise _FieldError(key, f"{key} must be a string")
    return value


class _FieldError(Exception):
    def __init__(self, field_name: str, reason: str):
        super().__init__(reason)
        self.field_name = field_name
        self.reason = reason


def _parse_record(record: dict) -> Post:
    post_id = record.get("id")
    if not isinstance(post_id, str) or not post_id:
        raise _FieldError("id", "id must be a nonempty string")
    author = record.get("author_id")
    if not isinstance(author, str) or not author:
        raise _FieldError("author_id", "author_id must be a nonempty string")
    raw_ts = record.get("timestamp")
    if not isinstance(raw_ts, str):
        raise _FieldError("timestamp", "timestamp must be an ISO-8601 string")
    try:
        ts = parse_timestamp(raw_ts)
    except ValueError:
        raise _FieldError("timestamp", f"timestamp does not parse as ISO-8601: {raw_ts!r}")
    text = record.get("text", "")
    if not isinstance(text, str):
        raise _FieldError("text", "text must be a string")
    repost_of = _optional_str(record, "repost_of")
    reply_to = _optional_str(record, "reply_to")
    quote_of = _optional_str(record, "quote_of")
    if repost_of is not None and (reply_to is not None or quote_of is not None):
        raise _FieldError("repost_of", "a pure repost cannot also reply or quote")
    raw_urls = record.get("urls") or []
    if not isinstance(raw_urls, list) or not all(isinstance(u, str) for u in raw_urls):
        raise _FieldError("urls", "urls must be a list of strings")
    urls = []
    for raw in raw_urls:
        ref = normalize_url(raw)
        if ref is not None and ref.url not in urls:
            urls.append(ref.url)
    return Post(
        post_id=post_id,
        author_id=author,
        timestamp=ts,
        text=text,
        repost_of=repost_of,
        reply_to=reply_to,
        quote_of=quote_of,
        urls=tuple(urls),
    )


def iter_posts(stream: Iterable[str]) -> Iterator[tuple[int, Post | None, Reject | None]]:
    """Yield (line_no, post, reject) per input line; exactly one of post/reject is set.

    Blank lines are skipped. The iterator holds no more than one record at a
    time, so arbitrarily long streams parse in bounded memory.
    """
    try:
        for line_no, line in enumerate(stream, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                yield line_no, None, Reject(line_no, "record", f"invalid JSON: {exc.msg}")
                continue
            if not isinstance(record, dict):
                yield line_no, None, Reject(line_no, "record", "record is not an object")
                continue
            try:
                yield line_no, _parse_record(record), None
            except _FieldError as exc:
                yield line_no, None, Reject(line_no, exc.field_name, exc.reason)
    except (OSError, UnicodeDecodeError) as exc:
        raise StreamError(f"post stream unreadable: {exc}") from exc


def parse_posts(stream: Iterable[str]) -> tuple[list[Post], list[Reject]]:
    """Parse every line of a newline-delimited post stream.

    Well-formed records map one-to-one onto posts; duplicated post ids keep
    the first occurrence and reject the rest. Processing is batched so the
    peak overhead beyond the output lists stays bounded.
    """
    posts: list[Post] = []
    rejects: list[Reject] = []
    seen_ids: set[str] = set()
    batch: list[tuple[int, Post | None, Reject | None]] = []

    def flush() -> None:
        for line_no, post, reject in batch:
            if reject is not None:
                rejects.append(reject)
            elif post is not None:
                if post.post_id in seen_ids:
                    rejects.append(Reject(line_no, "id", f"duplicate post id {post.post_id!r}"))
                else:
                    seen_ids.add(post.post_id)
                    posts.append(post)
        batch.clear()

    for item in iter_posts(stream):
        batch.append(item)
        if len(batch) >= PARSE_BATCH_SIZE:
            flush()
    flush()
    return posts, rejects


def parse_events(stream: IO[str] | Iterable[str], allowed_types: set[str]) -> list[EventRecord]:
    """Parse the events CSV, keeping allow-listed types and summing duplicates.

    Rows with a negative or non-integer count, an unknown type, or a bad date
    are dropped.
    """
    if not allowed_types:
        raise ValueError("allowed_types must be nonempty")
    reader = csv.DictReader(stream)
    counts: dict[tuple[date, str], int] = {}
    for row in reader:
        event_type = (row.get("event_type") or "").strip()
        if event_type not in allowed_types:
            continue
        try:
            day = date.fromisoformat((row.get("date") or "").strip())
            count = int((row.get("count") or "").strip())
        except ValueError:
            continue
        if count < 0:
            continue
        key = (day, event_type)
        counts[key] = counts.get(key, 0) + count
    return [
        EventRecord(date=d, event_type=t, count=c)
        for (d, t), c in sorted(counts.items(), key=lambda kv: (kv[0][0], kv[0][1]))
    ]
