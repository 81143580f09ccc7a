"""Access-log parsing and splitting of per-user request streams into sessions."""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import BinaryIO, Callable, Iterable, Mapping, TextIO, Union

__all__ = [
    "AccessRecord",
    "SessionizationConfig",
    "Session",
    "RejectedLine",
    "ParseResult",
    "ParseError",
    "parse_log",
    "filter_records",
    "sessionize",
]

LOG_FORMATS = ("csv", "clf")
CSV_HEADER = ("timestamp", "user_id", "object_id")


class ParseError(ValueError):
    """Raised in strict mode for a malformed line, or for unusable input."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


@dataclass(frozen=True)
class AccessRecord:
    """One request: who asked for what, when (seconds since epoch)."""

    timestamp: int
    user_id: str
    object_id: str

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")
        if not self.user_id:
            raise ValueError("user_id must be non-empty")
        if not self.object_id:
            raise ValueError("object_id must be non-empty")


@dataclass(frozen=True)
class SessionizationConfig:
    """Inactivity threshold in seconds; a gap strictly larger than it splits."""

    inactivity_threshold: int = 1800

    def __post_init__(self):
        if not isinstance(self.inactivity_threshold, int) or self.inactivity_threshold <= 0:
            raise ValueError(
                f"inactivity_threshold must be a positive integer, got {self.inactivity_threshold!r}"
            )


@dataclass(frozen=True)
class Session:
    """A maximal run of one user's requests with no over-threshold gap.

    ``requests`` is time-ordered; ``object_set`` and ``object_counts`` are
    derived from it (distinct objects, and per-object access counts).
    """

    session_id: int
    user_id: str
    requests: tuple[tuple[int, str], ...]
    object_set: frozenset[str] = field(repr=False)
    object_counts: Mapping[str, int] = field(repr=False)

    @classmethod
    def from_requests(cls, session_id: int, user_id: str, requests) -> "Session":
        reqs = tuple((int(ts), str(obj)) for ts, obj in requests)
        if not reqs:
            raise ValueError("a session must contain at least one request")
        for (t0, _), (t1, _) in zip(reqs, reqs[1:]):
            if t1 < t0:
                raise ValueError("session requests must have non-decreasing timestamps")
        counts = Counter(obj for _, obj in reqs)
        return cls(
            session_id=session_id,
            user_id=user_id,
            requests=reqs,
            object_set=frozenset(counts),
            object_counts=dict(counts),
        )

    @property
    def first_timestamp(self) -> int:
        return self.requests[0][0]

    def __len__(self) -> int:
        return len(self.requests)


@dataclass(frozen=True)
class RejectedLine:
    line_number: int
    reason: str


@dataclass
class ParseResult:
    records: list[AccessRecord]
    rejects: list[RejectedLine]


# Common Log Format, e.g.
#   127.0.0.1 - frank [10/Oct/2000:13:55:36 -0700] "GET /apache_pb.gif HTTP/1.0" 200 2326
_CLF_RE = re.compile(
    r'^(?P<host>\S+) (?P<ident>\S+) (?P<user>\S+) '
    r'\[(?P<day>\d{2})/(?P<mon>[A-Za-z]{3})/(?P<year>\d{4}):'
    r'(?P<hh>\d{2}):(?P<mm>\d{2}):(?P<ss>\d{2}) (?P<tz>[+-]\d{4})\] '
    r'"(?P<request>[^"]*)" (?P<status>\S+) (?P<size>\S+)\s*$'
)

# Month names are fixed by the format, not by locale.
_CLF_MONTHS = {
    "Jan": 1, "Feb": 2, "Mar": 3, "Apr": 4, "May": 5, "Jun": 6,
    "Jul": 7, "Aug": 8, "Sep": 9, "Oct": 10, "Nov": 11, "Dec": 12,
}


def _iter_lines(source: Union[bytes, str, BinaryIO, TextIO, Iterable[str]]) -> Iterable[str]:
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    elif hasattr(source, "read"):
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    else:
        for line in source:
            yield line.rstrip("\r\n")
        return
    yield from text.splitlines()


def _parse_csv_line(line: str) -> AccessRecord:
    row = next(csv.reader([line]))
    if len(row) != 3:
        raise ValueError(f"expected 3 fields, got {len(row)}")
    ts_text, user_id, object_id = (f.strip() for f in row)
    try:
        timestamp = int(ts_text)
    except ValueError:
        raise ValueError(f"timestamp is not an integer: {ts_text!r}") from None
    if timestamp < 0:
        raise ValueError(f"timestamp is negative: {timestamp}")
    if not user_id:
        raise ValueError("empty user_id")
    if not object_id:
        raise ValueError("empty object_id")
    return AccessRecord(timestamp, user_id, object_id)


def _parse_clf_line(line: str) -> AccessRecord:
    m = _CLF_RE.match(line)
    if m is None:
        raise ValueError("does not match Common Log Format")
    month = _CLF_MONTHS.get(m["mon"].capitalize())
    if month is None:
        raise ValueError(f"unknown month abbreviation: {m['mon']!r}")
    tz_text = m["tz"]
    offset = timedelta(hours=int(tz_text[1:3]), minutes=int(tz_text[3:5]))
    if tz_text[0] == "-":
        offset = -offset
    try:
        moment = datetime(
            int(m["year"]), month, int(m["day"]),
            int(m["hh"]), int(m["mm"]), int(m["ss"]),
            tzinfo=timezone(offset),
        )
    except ValueError as exc:
        raise ValueError(f"invalid date/time: {exc}") from None
    request = m["request"].split()
    if len(request) < 2:
        raise ValueError(f"request line has no path: {m['request']!r}")
    return AccessRecord(int(moment.timestamp()), m["host"], request[1])


def parse_log(source, fmt: str = "csv", strict: bool = False) -> ParseResult:
    """Parse a raw log into access records, input order preserved.

    ``fmt`` is ``"csv"`` (header ``timestamp,user_id,object_id`` required) or
    ``"clf"`` (Common Log Format; client IP becomes the user, the request path
    the object).  Malformed lines are collected into ``rejects`` with their
    1-based line number, or raise :class:`ParseError` when ``strict`` is set.
    """
    if fmt not in LOG_FORMATS:
        raise ValueError(f"unknown log format {fmt!r}; expected one of {LOG_FORMATS}")
    parse_line = _parse_csv_line if fmt == "csv" else _parse_clf_line
    records: list[AccessRecord] = []
    rejects: list[RejectedLine] = []

    def reject(line_number: int, reason: str) -> None:
        if strict:
            raise ParseError(line_number, reason)
        rejects.append(RejectedLine(line_number, reason))

    expect_header = fmt == "csv"
    for line_number, line in enumerate(_iter_lines(source), start=1):
        if expect_header:
            expect_header = False
            header = tuple(f.strip() for f in next(csv.reader([line]))) if line else ()
            if header != CSV_HEADER:
                reject(line_number, f"expected header {','.join(CSV_HEADER)!r}, got {line!r}")
            continue
        if not line.strip():
            reject(line_number, "empty line")
            continue
        try:
            records.append(parse_line(line))
        except ValueError as exc:
            reject(line_number, str(exc))
    return ParseResult(records, rejects)


def filter_records(
    records: Iterable[AccessRecord], allowed: Callable[[str], bool]
) -> list[AccessRecord]:
    """Keep records whose object satisfies the predicate, order preserved."""
    return [r for r in records if allowed(r.object_id)]


def sessionize(
    records: Iterable[AccessRecord],
    config: SessionizationConfig = SessionizationConfig(),
) -> list[Session]:
    """Cut each user's requests into sessions at gaps over the threshold.

    Records may arrive unordered; they are sorted per user by timestamp with
    ties kept in input order.  A gap exactly equal to the threshold stays
    within a session.  Session ids are dense, assigned in order of
    (first timestamp, user_id).
    """
    threshold = config.inactivity_threshold
    by_user: dict[str, list[tuple[int, str]]] = {}
    for record in records:
        by_user.setdefault(record.user_id, []).append((record.timestamp, record.object_id))

    runs: list[tuple[int, str, list[tuple[int, str]]]] = []
    for user_id, requests in by_user.items():
        requests.sort(key=lambda req: req[0])
        start = 0
        for i in range(1, len(requests)):
            if requests[i][0] - requests[i - 1][0] > threshold:
                runs.append((requests[start][0], user_id, requests[start:i]))
                start = i
        runs.append((requests[start][0], user_id, requests[start:]))

    runs.sort(key=lambda run: (run[0], run[1]))
    return [
        Session.from_requests(session_id, user_id, requests)
        for session_id, (_, user_id, requests) in enumerate(runs)
    ]
