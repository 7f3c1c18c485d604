"""Append-only, hash-chained session traces.

One JSONL file per session. Every line is the canonical JSON serialization
of a record whose hash covers the previous record's hash, so any interior
edit, insertion, or reorder is detectable. Truncation of the newest records
is the one tamper class this scheme cannot see; verification still reports
whatever prefix survives as intact.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Iterable

GENESIS_PREV_HASH = "0" * 64

_RECORD_KEYS = frozenset({"hash", "kind", "payload", "prev_hash", "seq", "session_id", "timestamp"})


class TraceKind(str, Enum):
    GOAL_INTAKE = "GoalIntake"
    PROFILE_BOUND = "ProfileBound"
    PLAN_SUBMITTED = "PlanSubmitted"
    STEP_FINDINGS = "StepFindings"
    STEP_VERDICT = "StepVerdict"
    ELEVATION_OPENED = "ElevationOpened"
    ELEVATION_DECIDED = "ElevationDecided"
    ELEVATION_EXPIRED = "ElevationExpired"
    EXECUTION_DELTA = "ExecutionDelta"
    EXECUTION_SKIPPED = "ExecutionSkipped"


class StorageFailure(RuntimeError):
    pass


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def compute_hash(
    *, seq: int, timestamp: str, session_id: str, kind: str, payload: dict[str, Any], prev_hash: str
) -> str:
    body = _canonical(
        {
            "kind": kind,
            "payload": payload,
            "prev_hash": prev_hash,
            "seq": seq,
            "session_id": session_id,
            "timestamp": timestamp,
        }
    )
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    timestamp: str
    session_id: str
    kind: TraceKind
    payload: dict[str, Any]
    prev_hash: str
    hash: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "session_id": self.session_id,
            "kind": self.kind.value,
            "payload": self.payload,
            "prev_hash": self.prev_hash,
            "hash": self.hash,
        }

    def to_line(self) -> str:
        return _canonical(self.to_dict())


def format_timestamp(epoch: float) -> str:
    dt = datetime.fromtimestamp(epoch, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond:06d}Z"


class TraceWriter:
    """Appends records to one session's trace file, extending the hash chain.

    Reopens an existing file by reading its tail so a restarted process
    continues the chain instead of forking it.
    """

    def __init__(self, path: str, session_id: str, clock: Callable[[], float] = time.time):
        self.path = path
        self.session_id = session_id
        self.clock = clock
        self._seq = 0
        self._prev_hash = GENESIS_PREV_HASH
        self._load_tail()

    def _load_tail(self) -> None:
        try:
            with open(self.path, encoding="utf-8") as fh:
                last = None
                for line in fh:
                    if line.strip():
                        last = line
        except FileNotFoundError:
            return
        except OSError as exc:
            raise StorageFailure(f"cannot read existing trace: {exc}") from exc
        if last is None:
            return
        try:
            record = json.loads(last)
            self._seq = int(record["seq"]) + 1
            self._prev_hash = str(record["hash"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise StorageFailure(f"existing trace tail is unreadable: {exc}") from exc

    def append(self, kind: TraceKind, payload: dict[str, Any]) -> TraceRecord:
        timestamp = format_timestamp(self.clock())
        digest = compute_hash(
            seq=self._seq,
            timestamp=timestamp,
            session_id=self.session_id,
            kind=kind.value,
            payload=payload,
            prev_hash=self._prev_hash,
        )
        record = TraceRecord(
            seq=self._seq,
            timestamp=timestamp,
            session_id=self.session_id,
            kind=kind,
            payload=payload,
            prev_hash=self._prev_hash,
            hash=digest,
        )
        try:
            os.makedirs(os.path.dirname(self.path) or ".", exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_line() + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append trace record: {exc}") from exc
        self._seq += 1
        self._prev_hash = digest
        return record


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_bad_index: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "first_bad_index": self.first_bad_index}


def verify_lines(lines: Iterable[str]) -> VerifyResult:
    prev_hash = GENESIS_PREV_HASH
    session_id: str | None = None
    index = -1
    for index, line in enumerate(lines):
        line = line.rstrip("\n")
        try:
            record = json.loads(line)
        except json.JSONDecodeError:
            return VerifyResult(False, index)
        if not isinstance(record, dict) or set(record) != _RECORD_KEYS:
            return VerifyResult(False, index)
        if _canonical(record) != line:
            return VerifyResult(False, index)
        if record["seq"] != index:
            return VerifyResult(False, index)
        if session_id is None:
            session_id = record["session_id"]
        elif record["session_id"] != session_id:
            return VerifyResult(False, index)
        if record["prev_hash"] != prev_hash:
            return VerifyResult(False, index)
        try:
            kind = str(record["kind"])
            TraceKind(kind)
            expected = compute_hash(
                seq=record["seq"],
                timestamp=record["timestamp"],
                session_id=record["session_id"],
                kind=kind,
                payload=record["payload"],
                prev_hash=record["prev_hash"],
            )
        except (ValueError, TypeError):
            return VerifyResult(False, index)
        if record["hash"] != expected:
            return VerifyResult(False, index)
        prev_hash = record["hash"]
    return VerifyResult(True, None)


def verify_file(path: str) -> VerifyResult:
    try:
        with open(path, encoding="utf-8") as fh:
            return verify_lines(fh)
    except OSError as exc:
        raise StorageFailure(f"cannot read trace: {exc}") from exc


def read_trace(path: str) -> list[TraceRecord]:
    records: list[TraceRecord] = []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                raw = json.loads(line)
                records.append(
                    TraceRecord(
                        seq=raw["seq"],
                        timestamp=raw["timestamp"],
                        session_id=raw["session_id"],
                        kind=TraceKind(raw["kind"]),
                        payload=raw["payload"],
                        prev_hash=raw["prev_hash"],
                        hash=raw["hash"],
                    )
                )
    except FileNotFoundError:
        return []
    except OSError as exc:
        raise StorageFailure(f"cannot read trace: {exc}") from exc
    return records


def query(
    records: Iterable[TraceRecord],
    *,
    kind: TraceKind | None = None,
    seq_from: int | None = None,
    seq_to: int | None = None,
) -> list[TraceRecord]:
    out = []
    for record in records:
        if kind is not None and record.kind is not kind:
            continue
        if seq_from is not None and record.seq < seq_from:
            continue
        if seq_to is not None and record.seq > seq_to:
            continue
        out.append(record)
    return out
