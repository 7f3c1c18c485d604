"""Session orchestration: bind a profile, annotate plans, gate execution.

This layer is transport-free. The HTTP gateway and the offline CLI both
call into it, which is what keeps their observable outputs identical.
"""

from __future__ import annotations

import os
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Callable

from .action_parser import (
    CustomRule,
    InputTooLargeError,
    ParseReport,
    action_to_dict,
    load_rules_file,
    parse_command,
)
from .audit_trace import TraceKind, TraceRecord, TraceWriter, read_trace
from .elevation import ElevationError, ElevationRegistry, ElevationRequest, ElevationState
from .host_sim import (
    HostState,
    apply_step,
    check_ceilings,
    initial_state,
    load_fixture_file,
)
from .plan_model import (
    BoundaryProfile,
    Goal,
    PRESETS,
    Plan,
    PlanFormatError,
    STRICTNESS_ORDER,
    Strictness,
    Verdict,
    load_plan,
    validate_profile,
)
from .policy_engine import (
    DEFAULT_TABLE,
    PlanJudgment,
    PolicyTable,
    StepJudgment,
    judge_plan,
    load_table_file,
)
from .risk_classifier import (
    ClassificationContext,
    Finding,
    classify_actions,
    risk_classes_of,
)

DEFAULT_CWD = "/work"


def strictness_floor(profile: BoundaryProfile, floor: Strictness) -> BoundaryProfile:
    """Tighten the profile's strictness to at least the gateway floor."""
    if STRICTNESS_ORDER.index(floor) < STRICTNESS_ORDER.index(profile.strictness):
        return replace(profile, strictness=floor)
    return profile


@dataclass(frozen=True)
class EngineSettings:
    policy_table: PolicyTable = DEFAULT_TABLE
    custom_rules: tuple[CustomRule, ...] = ()
    floor: Strictness = Strictness.PERMISSIVE
    host_fixture: dict[str, Any] | None = None

    @classmethod
    def from_paths(
        cls,
        *,
        rules_path: str | None = None,
        policy_table_path: str | None = None,
        host_fixture_path: str | None = None,
        floor: Strictness = Strictness.PERMISSIVE,
    ) -> "EngineSettings":
        table = load_table_file(policy_table_path) if policy_table_path else DEFAULT_TABLE
        rules = load_rules_file(rules_path) if rules_path else ()
        fixture = None
        if host_fixture_path:
            fixture = load_fixture_file(host_fixture_path).to_dict()
        return cls(policy_table=table, custom_rules=rules, host_fixture=fixture)._with_floor(floor)

    def _with_floor(self, floor: Strictness) -> "EngineSettings":
        return EngineSettings(
            policy_table=self.policy_table,
            custom_rules=self.custom_rules,
            floor=floor,
            host_fixture=self.host_fixture,
        )


@dataclass(frozen=True)
class StepAnnotation:
    step_index: int
    raw: str
    rationale: str
    report: ParseReport
    findings: tuple[Finding, ...]
    judgment: StepJudgment


@dataclass(frozen=True)
class PlanAnnotation:
    plan: Plan
    profile: BoundaryProfile
    steps: tuple[StepAnnotation, ...]
    judgment: PlanJudgment

    @property
    def verdict(self) -> Verdict:
        return self.judgment.verdict


def annotate_plan(
    plan: Plan, profile: BoundaryProfile, settings: EngineSettings = EngineSettings()
) -> PlanAnnotation:
    effective = strictness_floor(profile, settings.floor)
    cwd = effective.scope_paths[0] if effective.scope_paths else DEFAULT_CWD
    ctx = ClassificationContext.from_profile(effective)
    step_annotations: list[StepAnnotation] = []
    per_step_findings: list[tuple[Finding, ...]] = []
    for step in plan.steps:
        report = parse_command(step.raw, cwd, rules=settings.custom_rules)
        findings = tuple(classify_actions(report.actions, ctx))
        step_annotations.append(
            StepAnnotation(
                step_index=step.index,
                raw=step.raw,
                rationale=step.rationale,
                report=report,
                findings=findings,
                judgment=None,  # type: ignore[arg-type]  # filled below
            )
        )
        per_step_findings.append(findings)
    judgment = judge_plan(per_step_findings, effective, settings.policy_table)
    steps = tuple(
        replace(annotation, judgment=judgment.steps[i])
        for i, annotation in enumerate(step_annotations)
    )
    return PlanAnnotation(plan=plan, profile=effective, steps=steps, judgment=judgment)


def annotation_to_dict(
    annotation: PlanAnnotation,
    *,
    session_id: str | None = None,
    elevation_ids: dict[int, str] | None = None,
) -> dict[str, Any]:
    all_findings = [f for s in annotation.steps for f in s.findings]
    steps_out = []
    for s in annotation.steps:
        verdict_obj: dict[str, Any] = {
            "decision": s.judgment.verdict.value,
            "rationale": list(s.judgment.rationale),
        }
        if elevation_ids and s.step_index in elevation_ids:
            verdict_obj["elevation_id"] = elevation_ids[s.step_index]
        steps_out.append(
            {
                "index": s.step_index,
                "raw": s.raw,
                "actions": [action_to_dict(a) for a in s.report.actions],
                "parse_diagnostics": [d.to_dict() for d in s.report.diagnostics],
                "findings": [f.to_dict() for f in s.findings],
                "verdict": verdict_obj,
                "explanation": [j.to_dict() for j in s.judgment.judgments],
            }
        )
    out: dict[str, Any] = {
        "plan_id": annotation.plan.plan_id,
        "goal": annotation.plan.goal,
        "verdict": {
            "decision": annotation.judgment.verdict.value,
            "blocking_steps": list(annotation.judgment.blocking_steps),
        },
        "risk_classes": [c.value for c in risk_classes_of(all_findings)],
        "steps": steps_out,
    }
    if session_id is not None:
        out["session_id"] = session_id
    return out


class GatewayError(Exception):
    def __init__(self, status: int, code: str, message: str, extra: dict[str, Any] | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.extra = extra or {}


@dataclass
class PlanRecord:
    plan: Plan
    annotation: PlanAnnotation
    elevation_ids: dict[int, str] = field(default_factory=dict)


@dataclass
class Session:
    session_id: str
    goal: Goal
    profile: BoundaryProfile
    preset: str | None
    writer: TraceWriter
    host: HostState
    plans: dict[str, PlanRecord] = field(default_factory=dict)


class GatewayService:
    """One gateway process: sessions, elevations, traces, simulated host."""

    def __init__(
        self,
        data_dir: str,
        settings: EngineSettings = EngineSettings(),
        clock: Callable[[], float] = time.time,
    ):
        self.data_dir = data_dir
        self.settings = settings
        self.clock = clock
        self.registry = ElevationRegistry(clock=clock)
        self.sessions: dict[str, Session] = {}
        # set by the HTTP layer to fan records out to event streams
        self.on_trace: Callable[[str, TraceRecord], None] | None = None
        self._elevation_sessions: dict[str, str] = {}

    # -- internals ------------------------------------------------------

    def _trace(self, session: Session, kind: TraceKind, payload: dict[str, Any]) -> TraceRecord:
        record = session.writer.append(kind, payload)
        if self.on_trace is not None:
            self.on_trace(session.session_id, record)
        return record

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise GatewayError(404, "UnknownSession", f"no session {session_id!r}")
        return session

    def trace_path(self, session_id: str) -> str:
        return os.path.join(self.data_dir, "traces", f"{session_id}.jsonl")

    def sweep_expirations(self) -> list[ElevationRequest]:
        """Expire overdue elevations and trace each expiry in its session."""
        expired = self.registry.sweep()
        for request in expired:
            session = self.sessions.get(request.session_id)
            if session is not None:
                self._trace(
                    session,
                    TraceKind.ELEVATION_EXPIRED,
                    {
                        "elevation_id": request.elevation_id,
                        "plan_id": request.plan_id,
                        "step_index": request.step_index,
                        "deadline": request.deadline,
                    },
                )
        return expired

    # -- session lifecycle ----------------------------------------------

    def create_session(self, body: Any) -> dict[str, Any]:
        if not isinstance(body, dict):
            raise GatewayError(400, "BadRequest", "request body must be a JSON object")
        extra = set(body) - {"goal", "session_label", "profile", "preset"}
        if extra:
            raise GatewayError(400, "BadRequest", f"unknown fields: {sorted(extra)}")
        goal_text = body.get("goal", "")
        if not isinstance(goal_text, str):
            raise GatewayError(400, "BadRequest", "goal must be a string")
        label = body.get("session_label", "")
        if not isinstance(label, str):
            raise GatewayError(400, "BadRequest", "session_label must be a string")

        profile_doc = body.get("profile")
        preset_name = body.get("preset")
        if profile_doc is not None and preset_name is not None:
            raise GatewayError(400, "AmbiguousProfile", "give either profile or preset, not both")
        if profile_doc is None and preset_name is None:
            raise GatewayError(400, "MissingProfile", "a profile or preset is required")
        if preset_name is not None:
            if preset_name not in PRESETS:
                raise GatewayError(400, "BadPreset", f"unknown preset {preset_name!r}")
            profile = PRESETS[preset_name]
        else:
            try:
                profile = validate_profile(profile_doc)
            except Exception as exc:
                issues = getattr(exc, "issues", [])
                raise GatewayError(
                    400,
                    "InvalidProfile",
                    str(exc),
                    extra={"issues": [i.to_dict() for i in issues]},
                ) from exc
        effective = strictness_floor(profile, self.settings.floor)

        session_id = uuid.uuid4().hex
        writer = TraceWriter(self.trace_path(session_id), session_id, clock=self.clock)
        session = Session(
            session_id=session_id,
            goal=Goal(text=goal_text, session_label=label),
            profile=effective,
            preset=preset_name,
            writer=writer,
            host=initial_state(self.settings.host_fixture),
        )
        self.sessions[session_id] = session
        self._trace(session, TraceKind.GOAL_INTAKE, {"goal": goal_text, "session_label": label})
        self._trace(
            session,
            TraceKind.PROFILE_BOUND,
            {"profile": effective.to_dict(), "preset": preset_name},
        )
        return {"session_id": session_id, "profile": effective.to_dict()}

    # -- plan intake ------------------------------------------------------

    def submit_plan(self, session_id: str, body: Any) -> dict[str, Any]:
        session = self._session(session_id)
        try:
            plan = load_plan(body)
        except PlanFormatError as exc:
            raise GatewayError(400, exc.code, str(exc)) from exc
        if plan.plan_id in session.plans:
            raise GatewayError(409, "DuplicatePlanId", f"plan {plan.plan_id!r} already submitted")
        try:
            annotation = annotate_plan(plan, session.profile, self.settings)
        except InputTooLargeError as exc:
            raise GatewayError(400, "InputTooLarge", str(exc)) from exc

        record = PlanRecord(plan=plan, annotation=annotation)
        session.plans[plan.plan_id] = record

        self._trace(
            session,
            TraceKind.PLAN_SUBMITTED,
            {
                "plan_id": plan.plan_id,
                "goal": plan.goal,
                "steps": [
                    {"raw": s.raw, "rationale": s.rationale} if s.rationale else {"raw": s.raw}
                    for s in plan.steps
                ],
            },
        )
        for step in annotation.steps:
            self._trace(
                session,
                TraceKind.STEP_FINDINGS,
                {
                    "plan_id": plan.plan_id,
                    "step_index": step.step_index,
                    "raw": step.raw,
                    "actions": [action_to_dict(a) for a in step.report.actions],
                    "diagnostics": [d.to_dict() for d in step.report.diagnostics],
                    "findings": [f.to_dict() for f in step.findings],
                },
            )
            self._trace(
                session,
                TraceKind.STEP_VERDICT,
                {
                    "plan_id": plan.plan_id,
                    "step_index": step.step_index,
                    "decision": step.judgment.verdict.value,
                    "rationale": list(step.judgment.rationale),
                    "explanation": [j.to_dict() for j in step.judgment.judgments],
                },
            )
            if step.judgment.verdict is Verdict.ELEVATE:
                request = self.registry.open_request(
                    session_id=session_id,
                    plan_id=plan.plan_id,
                    step_index=step.step_index,
                    step_verdict=step.judgment.verdict,
                    findings=tuple(f.to_dict() for f in step.findings),
                    explanation=tuple(j.to_dict() for j in step.judgment.judgments),
                    timeout_s=session.profile.confirmation_timeout_s,
                )
                record.elevation_ids[step.step_index] = request.elevation_id
                self._elevation_sessions[request.elevation_id] = session_id
                self._trace(session, TraceKind.ELEVATION_OPENED, request.to_dict())

        return annotation_to_dict(
            annotation, session_id=session_id, elevation_ids=record.elevation_ids
        )

    # -- elevations -------------------------------------------------------

    def list_elevations(self, status: str = "pending", session_id: str | None = None) -> list[dict]:
        self.sweep_expirations()
        if status == "pending":
            requests = self.registry.pending(session_id)
        elif status == "all":
            requests = [
                r
                for r in self.registry.all_requests()
                if session_id is None or r.session_id == session_id
            ]
            requests.sort(key=lambda r: (r.created_at, r.elevation_id))
        else:
            raise GatewayError(400, "BadRequest", f"unsupported status filter {status!r}")
        return [r.to_dict() for r in requests]

    def decide_elevation(self, elevation_id: str, body: Any) -> dict[str, Any]:
        if not isinstance(body, dict):
            raise GatewayError(400, "BadRequest", "request body must be a JSON object")
        extra = set(body) - {"approve", "decided_by", "rationale"}
        if extra:
            raise GatewayError(400, "BadRequest", f"unknown fields: {sorted(extra)}")
        approve = body.get("approve")
        if not isinstance(approve, bool):
            raise GatewayError(400, "BadRequest", "approve must be true or false")
        decided_by = body.get("decided_by", "")
        if not isinstance(decided_by, str) or not decided_by.strip():
            raise GatewayError(400, "BadRequest", "decided_by must be a non-empty string")
        rationale = body.get("rationale", "")
        if not isinstance(rationale, str):
            raise GatewayError(400, "BadRequest", "rationale must be a string")

        self.sweep_expirations()
        try:
            request, changed = self.registry.decide(
                elevation_id, approve=approve, decided_by=decided_by, rationale=rationale
            )
        except ElevationError as exc:
            status = {"UnknownElevation": 404, "AlreadySettled": 409}.get(exc.code, 400)
            raise GatewayError(status, exc.code, exc.message) from exc
        if changed:
            session = self.sessions.get(request.session_id)
            if session is not None:
                self._trace(
                    session,
                    TraceKind.ELEVATION_DECIDED,
                    {
                        "elevation_id": request.elevation_id,
                        "plan_id": request.plan_id,
                        "step_index": request.step_index,
                        "state": request.state.value,
                        "decided_by": request.decided_by,
                        "rationale": request.decision_rationale,
                    },
                )
        return request.to_dict()

    # -- execution --------------------------------------------------------

    def execute_plan(self, session_id: str, body: Any) -> dict[str, Any]:
        session = self._session(session_id)
        if not isinstance(body, dict) or not isinstance(body.get("plan_id"), str):
            raise GatewayError(400, "BadRequest", "body must name a plan_id")
        record = session.plans.get(body["plan_id"])
        if record is None:
            raise GatewayError(404, "UnknownPlan", f"no plan {body['plan_id']!r} in this session")

        self.sweep_expirations()
        pending = [
            eid
            for eid in record.elevation_ids.values()
            if self.registry.get(eid).state is ElevationState.PENDING
        ]
        if pending:
            raise GatewayError(
                423,
                "UnresolvedElevation",
                "one or more elevation requests are still pending",
                extra={"elevation_ids": sorted(pending)},
            )

        results = []
        for step in record.annotation.steps:
            verdict = step.judgment.verdict
            elevation_id = record.elevation_ids.get(step.step_index)
            if verdict is Verdict.DENY:
                payload = {
                    "plan_id": record.plan.plan_id,
                    "step_index": step.step_index,
                    "reason": "Deny",
                }
                self._trace(session, TraceKind.EXECUTION_SKIPPED, payload)
                results.append({"step_index": step.step_index, "status": "SKIPPED", "reason": "Deny"})
                continue
            human_override = False
            if verdict is Verdict.ELEVATE:
                request = self.registry.get(elevation_id)
                if request.state is not ElevationState.APPROVED:
                    reason = (
                        "ElevationExpired"
                        if request.state is ElevationState.EXPIRED
                        else "ElevationDenied"
                    )
                    payload = {
                        "plan_id": record.plan.plan_id,
                        "step_index": step.step_index,
                        "reason": reason,
                        "elevation_id": elevation_id,
                    }
                    self._trace(session, TraceKind.EXECUTION_SKIPPED, payload)
                    results.append(
                        {
                            "step_index": step.step_index,
                            "status": "SKIPPED",
                            "reason": reason,
                            "elevation_id": elevation_id,
                        }
                    )
                    continue
                human_override = True
            session.host, delta = apply_step(session.host, step.report.actions)
            violations = check_ceilings(delta, session.profile)
            self._trace(
                session,
                TraceKind.EXECUTION_DELTA,
                {
                    "plan_id": record.plan.plan_id,
                    "step_index": step.step_index,
                    "delta": delta.to_dict(),
                    "violations": [v.to_dict() for v in violations],
                    "human_override": human_override,
                },
            )
            result: dict[str, Any] = {
                "step_index": step.step_index,
                "status": "EXECUTED",
                "delta": delta.to_dict(),
                "violations": [v.to_dict() for v in violations],
                "human_override": human_override,
            }
            if elevation_id is not None:
                result["elevation_id"] = elevation_id
            results.append(result)
        return {"session_id": session_id, "plan_id": record.plan.plan_id, "results": results}

    # -- traces -----------------------------------------------------------

    def trace_records(self, session_id: str) -> list[TraceRecord]:
        self._session(session_id)
        return read_trace(self.trace_path(session_id))

    def get_trace(self, session_id: str) -> dict[str, Any]:
        records = self.trace_records(session_id)
        return {"session_id": session_id, "records": [r.to_dict() for r in records]}
