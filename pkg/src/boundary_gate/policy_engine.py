"""Findings + declared profile -> verdicts.

Every risk class is governed by exactly one profile field. The mapping
table is complete over (class, field value, severity) and is checked for
monotonicity at load time: tightening the field value or raising the
severity never produces a laxer verdict. Override tables that break either
property are rejected.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .plan_model import (
    BoundaryProfile,
    DEPENDENCY_ORDER,
    DESTRUCTIVE_ORDER,
    EXPOSURE_ORDER,
    PERSISTENCE_ORDER,
    PRIVILEGE_ORDER,
    RiskClass,
    SEVERITY_ORDER,
    Severity,
    STRICTNESS_ORDER,
    Strictness,
    Verdict,
    join_all,
)
from .risk_classifier import Finding

GOVERNING_FIELD: dict[RiskClass, str] = {
    RiskClass.PRIVILEGE_EXPANSION: "privilege_ceiling",
    RiskClass.EXPOSURE_ENLARGEMENT: "exposure_ceiling",
    RiskClass.PERSISTENT_HOST_MODIFICATION: "persistence_ceiling",
    RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION: "dependency_policy",
    RiskClass.DESTRUCTIVE_REPAIR: "destructive_policy",
    RiskClass.SENSITIVE_RESOURCE_OVERREACH: "strictness",
}

# Tightest value first, matching the field orders in plan_model.
_LEVELS: dict[RiskClass, tuple[str, ...]] = {
    RiskClass.PRIVILEGE_EXPANSION: tuple(v.value for v in PRIVILEGE_ORDER),
    RiskClass.EXPOSURE_ENLARGEMENT: tuple(v.value for v in EXPOSURE_ORDER),
    RiskClass.PERSISTENT_HOST_MODIFICATION: tuple(v.value for v in PERSISTENCE_ORDER),
    RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION: tuple(v.value for v in DEPENDENCY_ORDER),
    RiskClass.DESTRUCTIVE_REPAIR: tuple(v.value for v in DESTRUCTIVE_ORDER),
    RiskClass.SENSITIVE_RESOURCE_OVERREACH: tuple(v.value for v in STRICTNESS_ORDER),
}

_D, _E, _A = Verdict.DENY.value, Verdict.ELEVATE.value, Verdict.ALLOW.value

BASE_TABLE: dict[str, dict[str, dict[str, str]]] = {
    RiskClass.PRIVILEGE_EXPANSION.value: {
        "USER": {"LOW": _E, "MEDIUM": _D, "HIGH": _D},
        "ELEVATED_WITH_CONFIRM": {"LOW": _E, "MEDIUM": _E, "HIGH": _E},
        "ELEVATED": {"LOW": _A, "MEDIUM": _A, "HIGH": _A},
    },
    RiskClass.EXPOSURE_ENLARGEMENT.value: {
        "NO_NETWORK": {"LOW": _D, "MEDIUM": _D, "HIGH": _D},
        "LOOPBACK": {"LOW": _E, "MEDIUM": _D, "HIGH": _D},
        "PRIVATE_NET": {"LOW": _A, "MEDIUM": _E, "HIGH": _E},
        "PUBLIC": {"LOW": _A, "MEDIUM": _A, "HIGH": _A},
    },
    RiskClass.PERSISTENT_HOST_MODIFICATION.value: {
        "NONE": {"LOW": _D, "MEDIUM": _D, "HIGH": _D},
        "SESSION_LOCAL": {"LOW": _E, "MEDIUM": _D, "HIGH": _D},
        "WORKSPACE": {"LOW": _A, "MEDIUM": _E, "HIGH": _E},
        "SYSTEM": {"LOW": _A, "MEDIUM": _A, "HIGH": _A},
    },
    RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION.value: {
        "FORBID": {"LOW": _D, "MEDIUM": _D, "HIGH": _D},
        "ALLOWLISTED_REGISTRIES": {"LOW": _E, "MEDIUM": _D, "HIGH": _D},
        "ANY_WITH_CONFIRM": {"LOW": _A, "MEDIUM": _E, "HIGH": _E},
        "ANY": {"LOW": _A, "MEDIUM": _A, "HIGH": _A},
    },
    RiskClass.DESTRUCTIVE_REPAIR.value: {
        "FORBID": {"LOW": _D, "MEDIUM": _D, "HIGH": _D},
        "CONFIRM": {"LOW": _E, "MEDIUM": _E, "HIGH": _E},
        "ALLOW": {"LOW": _A, "MEDIUM": _A, "HIGH": _A},
    },
    RiskClass.SENSITIVE_RESOURCE_OVERREACH.value: {
        "STRICT": {"LOW": _E, "MEDIUM": _E, "HIGH": _D},
        "STANDARD": {"LOW": _E, "MEDIUM": _E, "HIGH": _D},
        "PERMISSIVE": {"LOW": _E, "MEDIUM": _E, "HIGH": _E},
    },
}

# Under STRICT, a High finding sitting at its field's confirm tier hardens
# from Elevate to Deny.
_STRICT_HARDENED: frozenset[tuple[str, str]] = frozenset(
    {
        (RiskClass.PRIVILEGE_EXPANSION.value, "ELEVATED_WITH_CONFIRM"),
        (RiskClass.EXPOSURE_ENLARGEMENT.value, "PRIVATE_NET"),
        (RiskClass.PERSISTENT_HOST_MODIFICATION.value, "WORKSPACE"),
        (RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION.value, "ANY_WITH_CONFIRM"),
        (RiskClass.DESTRUCTIVE_REPAIR.value, "CONFIRM"),
    }
)


class PolicyTableError(ValueError):
    pass


@dataclass(frozen=True)
class PolicyTable:
    cells: dict[tuple[str, str, str], Verdict]

    def lookup(
        self,
        risk_class: RiskClass,
        level_value: str,
        severity: Severity,
        strictness: Strictness,
    ) -> Verdict:
        verdict = self.cells[(risk_class.value, level_value, severity.value)]
        if (
            strictness is Strictness.STRICT
            and severity is Severity.HIGH
            and verdict is Verdict.ELEVATE
            and (risk_class.value, level_value) in _STRICT_HARDENED
        ):
            return Verdict.DENY
        return verdict


def _validate(data: dict[str, dict[str, dict[str, str]]]) -> dict[tuple[str, str, str], Verdict]:
    cells: dict[tuple[str, str, str], Verdict] = {}
    severities = tuple(s.value for s in SEVERITY_ORDER)
    for risk_class, levels in _LEVELS.items():
        class_rows = data.get(risk_class.value)
        if class_rows is None:
            raise PolicyTableError(f"missing class {risk_class.value}")
        extra_levels = set(class_rows) - set(levels)
        if extra_levels:
            raise PolicyTableError(f"{risk_class.value}: unknown levels {sorted(extra_levels)}")
        for level in levels:
            row = class_rows.get(level)
            if row is None:
                raise PolicyTableError(f"{risk_class.value}: missing level {level}")
            extra = set(row) - set(severities)
            if extra:
                raise PolicyTableError(f"{risk_class.value}/{level}: unknown severities {sorted(extra)}")
            for severity in severities:
                raw = row.get(severity)
                if raw is None:
                    raise PolicyTableError(f"{risk_class.value}/{level}: missing severity {severity}")
                try:
                    cells[(risk_class.value, level, severity)] = Verdict(raw)
                except ValueError as exc:
                    raise PolicyTableError(
                        f"{risk_class.value}/{level}/{severity}: bad verdict {raw!r}"
                    ) from exc
        # loosening the field value must never tighten the verdict
        for severity in severities:
            ranks = [cells[(risk_class.value, level, severity)].rank for level in levels]
            if any(ranks[i] < ranks[i + 1] for i in range(len(ranks) - 1)):
                raise PolicyTableError(
                    f"{risk_class.value}/{severity}: verdict tightens as the field loosens"
                )
        # raising the severity must never loosen the verdict
        for level in levels:
            ranks = [cells[(risk_class.value, level, s)].rank for s in severities]
            if any(ranks[i] > ranks[i + 1] for i in range(len(ranks) - 1)):
                raise PolicyTableError(
                    f"{risk_class.value}/{level}: verdict loosens as severity rises"
                )
    extra_classes = set(data) - {rc.value for rc in _LEVELS}
    if extra_classes:
        raise PolicyTableError(f"unknown classes {sorted(extra_classes)}")
    return cells


def build_table(overrides: dict[str, Any] | None = None) -> PolicyTable:
    data = copy.deepcopy(BASE_TABLE)
    if overrides:
        if not isinstance(overrides, dict):
            raise PolicyTableError("override table must be a JSON object")
        for risk_class, levels in overrides.items():
            if risk_class not in data:
                raise PolicyTableError(f"unknown class {risk_class!r}")
            if not isinstance(levels, dict):
                raise PolicyTableError(f"{risk_class}: expected an object of levels")
            for level, row in levels.items():
                if not isinstance(row, dict):
                    raise PolicyTableError(f"{risk_class}/{level}: expected an object of severities")
                data.setdefault(risk_class, {}).setdefault(level, {}).update(row)
    return PolicyTable(cells=_validate(data))


def load_table_file(path: str) -> PolicyTable:
    try:
        with open(path, encoding="utf-8") as fh:
            overrides = json.load(fh)
    except OSError as exc:
        raise PolicyTableError(f"cannot read policy table: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PolicyTableError(f"policy table is not valid JSON: {exc}") from exc
    return build_table(overrides)


DEFAULT_TABLE = build_table()


def governing_value(profile: BoundaryProfile, risk_class: RiskClass) -> str:
    field = GOVERNING_FIELD[risk_class]
    if field == "dependency_policy":
        return profile.dependency_policy.mode.value
    value = getattr(profile, field)
    return value.value


@dataclass(frozen=True)
class FindingJudgment:
    finding: Finding
    profile_field: str
    field_value: str
    verdict: Verdict

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule_id": self.finding.rule_id,
            "risk_class": self.finding.risk_class.value if self.finding.risk_class else "UNKNOWN",
            "severity": self.finding.severity.value,
            "profile_field": self.profile_field,
            "field_value": self.field_value,
            "mapped_verdict": self.verdict.value,
        }


@dataclass(frozen=True)
class StepJudgment:
    verdict: Verdict
    findings: tuple[Finding, ...]
    judgments: tuple[FindingJudgment, ...]
    rationale: tuple[str, ...]


def judge_finding(
    finding: Finding, profile: BoundaryProfile, table: PolicyTable
) -> FindingJudgment:
    if finding.risk_class is None:
        # unparsed input is judged by strictness alone, outside the table
        verdict = Verdict.DENY if profile.strictness is Strictness.STRICT else Verdict.ELEVATE
        if profile.strictness is Strictness.PERMISSIVE:
            verdict = Verdict.ALLOW
        return FindingJudgment(
            finding=finding,
            profile_field="strictness",
            field_value=profile.strictness.value,
            verdict=verdict,
        )
    field = GOVERNING_FIELD[finding.risk_class]
    value = governing_value(profile, finding.risk_class)
    verdict = table.lookup(finding.risk_class, value, finding.severity, profile.strictness)
    return FindingJudgment(finding=finding, profile_field=field, field_value=value, verdict=verdict)


def judge_findings(
    findings: Sequence[Finding], profile: BoundaryProfile, table: PolicyTable = DEFAULT_TABLE
) -> StepJudgment:
    judgments = tuple(judge_finding(f, profile, table) for f in findings)
    verdict = join_all(j.verdict for j in judgments)
    rationale = tuple(
        f"{j.finding.rule_id}: {j.finding.detail}"
        for j in sorted(judgments, key=lambda j: j.finding.rule_id)
        if j.verdict is verdict and verdict is not Verdict.ALLOW
    )
    return StepJudgment(
        verdict=verdict, findings=tuple(findings), judgments=judgments, rationale=rationale
    )


@dataclass(frozen=True)
class PlanJudgment:
    verdict: Verdict
    blocking_steps: tuple[int, ...]
    steps: tuple[StepJudgment, ...]


def judge_plan(
    per_step_findings: Iterable[Sequence[Finding]],
    profile: BoundaryProfile,
    table: PolicyTable = DEFAULT_TABLE,
) -> PlanJudgment:
    steps = tuple(judge_findings(findings, profile, table) for findings in per_step_findings)
    verdict = join_all(s.verdict for s in steps)
    if verdict is Verdict.ALLOW:
        blocking: tuple[int, ...] = ()
    else:
        blocking = tuple(i for i, s in enumerate(steps) if s.verdict is verdict)
    return PlanJudgment(verdict=verdict, blocking_steps=blocking, steps=steps)
