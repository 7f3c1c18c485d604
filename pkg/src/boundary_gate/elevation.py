"""Human-in-the-loop elevation requests.

A request is opened only for an Elevate verdict, waits for a decision
until its deadline, and expires closed: an expired request is treated
exactly like a denial at execution time. Decisions are idempotent; a
conflicting second decision is an error, never a silent overwrite.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .plan_model import Verdict


class ElevationState(str, Enum):
    PENDING = "PENDING"
    APPROVED = "APPROVED"
    DENIED = "DENIED"
    EXPIRED = "EXPIRED"


NOT_ELEVATE = "NotElevate"
ALREADY_SETTLED = "AlreadySettled"
EMPTY_RATIONALE = "EmptyRationale"
UNKNOWN_ELEVATION = "UnknownElevation"


class ElevationError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


@dataclass
class ElevationRequest:
    elevation_id: str
    session_id: str
    plan_id: str
    step_index: int
    findings: tuple[dict[str, Any], ...]
    explanation: tuple[dict[str, Any], ...]
    created_at: float
    deadline: float
    state: ElevationState = ElevationState.PENDING
    decided_by: str | None = None
    decision_rationale: str | None = None
    decided_at: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "elevation_id": self.elevation_id,
            "session_id": self.session_id,
            "plan_id": self.plan_id,
            "step_index": self.step_index,
            "findings": [dict(f) for f in self.findings],
            "explanation": [dict(e) for e in self.explanation],
            "created_at": self.created_at,
            "deadline": self.deadline,
            "state": self.state.value,
            "decided_by": self.decided_by,
            "decision_rationale": self.decision_rationale,
        }

    @property
    def effectively_approved(self) -> bool:
        return self.state is ElevationState.APPROVED


@dataclass
class ElevationRegistry:
    """All open and settled requests for one gateway process."""

    clock: Callable[[], float] = time.time
    _requests: dict[str, ElevationRequest] = field(default_factory=dict)

    def open_request(
        self,
        *,
        session_id: str,
        plan_id: str,
        step_index: int,
        step_verdict: Verdict,
        findings: tuple[dict[str, Any], ...],
        explanation: tuple[dict[str, Any], ...],
        timeout_s: int,
    ) -> ElevationRequest:
        if step_verdict is not Verdict.ELEVATE:
            raise ElevationError(
                NOT_ELEVATE, f"cannot open an elevation for a {step_verdict.value} step"
            )
        now = self.clock()
        request = ElevationRequest(
            elevation_id=uuid.uuid4().hex,
            session_id=session_id,
            plan_id=plan_id,
            step_index=step_index,
            findings=findings,
            explanation=explanation,
            created_at=now,
            deadline=now + timeout_s,
        )
        self._requests[request.elevation_id] = request
        return request

    def get(self, elevation_id: str) -> ElevationRequest:
        request = self._requests.get(elevation_id)
        if request is None:
            raise ElevationError(UNKNOWN_ELEVATION, f"no elevation {elevation_id!r}")
        return request

    def all_requests(self) -> list[ElevationRequest]:
        return list(self._requests.values())

    def pending(self, session_id: str | None = None) -> list[ElevationRequest]:
        self.sweep()
        out = [
            r
            for r in self._requests.values()
            if r.state is ElevationState.PENDING
            and (session_id is None or r.session_id == session_id)
        ]
        out.sort(key=lambda r: (r.deadline, r.elevation_id))
        return out

    def sweep(self, now: float | None = None) -> list[ElevationRequest]:
        """Expire every pending request whose deadline has passed (inclusive)."""
        if now is None:
            now = self.clock()
        expired = []
        for request in self._requests.values():
            if request.state is ElevationState.PENDING and request.deadline <= now:
                request.state = ElevationState.EXPIRED
                request.decided_at = now
                expired.append(request)
        expired.sort(key=lambda r: (r.deadline, r.elevation_id))
        return expired

    def decide(
        self,
        elevation_id: str,
        *,
        approve: bool,
        decided_by: str,
        rationale: str = "",
    ) -> tuple[ElevationRequest, bool]:
        """Returns (request, changed). Repeating an identical decision is a no-op."""
        request = self.get(elevation_id)
        now = self.clock()
        if request.state is ElevationState.PENDING and request.deadline <= now:
            request.state = ElevationState.EXPIRED
            request.decided_at = now
        target = ElevationState.APPROVED if approve else ElevationState.DENIED
        if request.state is not ElevationState.PENDING:
            if request.state is target:
                return request, False
            raise ElevationError(
                ALREADY_SETTLED,
                f"elevation {elevation_id} already {request.state.value.lower()}",
            )
        if not approve and not rationale.strip():
            raise ElevationError(EMPTY_RATIONALE, "a denial needs a non-empty rationale")
        request.state = target
        request.decided_by = decided_by
        request.decision_rationale = rationale or None
        request.decided_at = now
        return request, True
