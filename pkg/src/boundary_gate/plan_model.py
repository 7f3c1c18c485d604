"""Core vocabulary: goals, boundary profiles, plans, verdict and risk enums."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable


class RiskClass(str, Enum):
    PRIVILEGE_EXPANSION = "PRIVILEGE_EXPANSION"
    SENSITIVE_RESOURCE_OVERREACH = "SENSITIVE_RESOURCE_OVERREACH"
    PERSISTENT_HOST_MODIFICATION = "PERSISTENT_HOST_MODIFICATION"
    EXPOSURE_ENLARGEMENT = "EXPOSURE_ENLARGEMENT"
    UNSAFE_DEPENDENCY_INTRODUCTION = "UNSAFE_DEPENDENCY_INTRODUCTION"
    DESTRUCTIVE_REPAIR = "DESTRUCTIVE_REPAIR"


class Severity(str, Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


SEVERITY_ORDER = (Severity.LOW, Severity.MEDIUM, Severity.HIGH)


class Verdict(str, Enum):
    ALLOW = "ALLOW"
    ELEVATE = "ELEVATE"
    DENY = "DENY"

    @property
    def rank(self) -> int:
        return _VERDICT_RANK[self]

    @staticmethod
    def join(a: "Verdict", b: "Verdict") -> "Verdict":
        return a if a.rank >= b.rank else b


_VERDICT_RANK = {Verdict.ALLOW: 0, Verdict.ELEVATE: 1, Verdict.DENY: 2}


def join_all(verdicts: Iterable[Verdict]) -> Verdict:
    """Fold of the verdict join; empty input folds to ALLOW."""
    result = Verdict.ALLOW
    for v in verdicts:
        result = Verdict.join(result, v)
    return result


class PersistenceCeiling(str, Enum):
    NONE = "NONE"
    SESSION_LOCAL = "SESSION_LOCAL"
    WORKSPACE = "WORKSPACE"
    SYSTEM = "SYSTEM"


class ExposureCeiling(str, Enum):
    NO_NETWORK = "NO_NETWORK"
    LOOPBACK = "LOOPBACK"
    PRIVATE_NET = "PRIVATE_NET"
    PUBLIC = "PUBLIC"


class PrivilegeCeiling(str, Enum):
    USER = "USER"
    ELEVATED_WITH_CONFIRM = "ELEVATED_WITH_CONFIRM"
    ELEVATED = "ELEVATED"


class DependencyMode(str, Enum):
    FORBID = "FORBID"
    ALLOWLISTED_REGISTRIES = "ALLOWLISTED_REGISTRIES"
    ANY_WITH_CONFIRM = "ANY_WITH_CONFIRM"
    ANY = "ANY"


class DestructivePolicy(str, Enum):
    FORBID = "FORBID"
    CONFIRM = "CONFIRM"
    ALLOW = "ALLOW"


class Strictness(str, Enum):
    PERMISSIVE = "PERMISSIVE"
    STANDARD = "STANDARD"
    STRICT = "STRICT"


# Per-field total orders, tightest value first. Used both by profile
# comparison and by the policy mapping table.
PERSISTENCE_ORDER = (
    PersistenceCeiling.NONE,
    PersistenceCeiling.SESSION_LOCAL,
    PersistenceCeiling.WORKSPACE,
    PersistenceCeiling.SYSTEM,
)
EXPOSURE_ORDER = (
    ExposureCeiling.NO_NETWORK,
    ExposureCeiling.LOOPBACK,
    ExposureCeiling.PRIVATE_NET,
    ExposureCeiling.PUBLIC,
)
PRIVILEGE_ORDER = (
    PrivilegeCeiling.USER,
    PrivilegeCeiling.ELEVATED_WITH_CONFIRM,
    PrivilegeCeiling.ELEVATED,
)
DEPENDENCY_ORDER = (
    DependencyMode.FORBID,
    DependencyMode.ALLOWLISTED_REGISTRIES,
    DependencyMode.ANY_WITH_CONFIRM,
    DependencyMode.ANY,
)
DESTRUCTIVE_ORDER = (
    DestructivePolicy.FORBID,
    DestructivePolicy.CONFIRM,
    DestructivePolicy.ALLOW,
)
# Strict gates the most, so it is the tightest value.
STRICTNESS_ORDER = (Strictness.STRICT, Strictness.STANDARD, Strictness.PERMISSIVE)


@dataclass(frozen=True)
class DependencyPolicy:
    mode: DependencyMode
    registries: tuple[str, ...] = ()

    def to_json(self) -> Any:
        if self.mode is DependencyMode.ALLOWLISTED_REGISTRIES:
            return {"policy": self.mode.value, "registries": list(self.registries)}
        return self.mode.value


@dataclass(frozen=True)
class BoundaryProfile:
    persistence_ceiling: PersistenceCeiling
    exposure_ceiling: ExposureCeiling
    privilege_ceiling: PrivilegeCeiling
    scope_paths: tuple[str, ...]
    dependency_policy: DependencyPolicy
    destructive_policy: DestructivePolicy
    confirmation_timeout_s: int
    strictness: Strictness

    def to_dict(self) -> dict[str, Any]:
        return {
            "persistence_ceiling": self.persistence_ceiling.value,
            "exposure_ceiling": self.exposure_ceiling.value,
            "privilege_ceiling": self.privilege_ceiling.value,
            "scope_paths": list(self.scope_paths),
            "dependency_policy": self.dependency_policy.to_json(),
            "destructive_policy": self.destructive_policy.value,
            "confirmation_timeout_s": self.confirmation_timeout_s,
            "strictness": self.strictness.value,
        }


class ProfileRelation(str, Enum):
    TIGHTER = "TIGHTER"
    LOOSER = "LOOSER"
    EQUAL = "EQUAL"
    INCOMPARABLE = "INCOMPARABLE"


# Validation issue codes. Each issue names the offending field.
MISSING_FIELD = "MissingField"
BAD_ENUM_VALUE = "BadEnumValue"
RELATIVE_SCOPE_PATH = "RelativeScopePath"
NON_POSITIVE_TIMEOUT = "NonPositiveTimeout"
UNKNOWN_FIELD = "UnknownField"


@dataclass(frozen=True)
class FieldIssue:
    code: str
    field: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"code": self.code, "field": self.field, "message": self.message}


class ProfileValidationError(ValueError):
    def __init__(self, issues: list[FieldIssue]):
        self.issues = issues
        super().__init__("; ".join(f"{i.code}({i.field}): {i.message}" for i in issues))


PROFILE_FIELDS = (
    "persistence_ceiling",
    "exposure_ceiling",
    "privilege_ceiling",
    "scope_paths",
    "dependency_policy",
    "destructive_policy",
    "confirmation_timeout_s",
    "strictness",
)

_ENUM_FIELDS = {
    "persistence_ceiling": PersistenceCeiling,
    "exposure_ceiling": ExposureCeiling,
    "privilege_ceiling": PrivilegeCeiling,
    "destructive_policy": DestructivePolicy,
    "strictness": Strictness,
}


def _normalize_scope_path(raw: str) -> str:
    path = raw.rstrip("/") or "/"
    while "//" in path:
        path = path.replace("//", "/")
    return path


def _parse_dependency_policy(value: Any, issues: list[FieldIssue]) -> DependencyPolicy | None:
    simple = {
        DependencyMode.FORBID.value,
        DependencyMode.ANY_WITH_CONFIRM.value,
        DependencyMode.ANY.value,
    }
    if isinstance(value, str):
        if value in simple:
            return DependencyPolicy(DependencyMode(value))
        issues.append(
            FieldIssue(BAD_ENUM_VALUE, "dependency_policy", f"not a dependency policy: {value!r}")
        )
        return None
    if isinstance(value, dict):
        extra = set(value) - {"policy", "registries"}
        if extra or value.get("policy") != DependencyMode.ALLOWLISTED_REGISTRIES.value:
            issues.append(
                FieldIssue(BAD_ENUM_VALUE, "dependency_policy", "malformed allowlist policy object")
            )
            return None
        registries = value.get("registries")
        if not isinstance(registries, list) or not all(isinstance(r, str) and r for r in registries):
            issues.append(
                FieldIssue(BAD_ENUM_VALUE, "dependency_policy", "registries must be a list of names")
            )
            return None
        return DependencyPolicy(DependencyMode.ALLOWLISTED_REGISTRIES, tuple(registries))
    issues.append(FieldIssue(BAD_ENUM_VALUE, "dependency_policy", "expected string or object"))
    return None


def validate_profile(document: Any) -> BoundaryProfile:
    """Check a profile document field by field; reject anything unknown."""
    issues: list[FieldIssue] = []
    if not isinstance(document, dict):
        raise ProfileValidationError(
            [FieldIssue(MISSING_FIELD, "<document>", "profile must be a JSON object")]
        )

    for name in sorted(set(document) - set(PROFILE_FIELDS)):
        issues.append(FieldIssue(UNKNOWN_FIELD, name, "field not part of the profile schema"))
    for name in PROFILE_FIELDS:
        if name not in document:
            issues.append(FieldIssue(MISSING_FIELD, name, "required field missing"))
    if issues:
        raise ProfileValidationError(issues)

    values: dict[str, Any] = {}
    for name, enum_cls in _ENUM_FIELDS.items():
        raw = document[name]
        if isinstance(raw, str) and raw in enum_cls._value2member_map_:
            values[name] = enum_cls(raw)
        else:
            issues.append(FieldIssue(BAD_ENUM_VALUE, name, f"not one of {enum_cls.__name__}: {raw!r}"))

    raw_scope = document["scope_paths"]
    if isinstance(raw_scope, list) and all(isinstance(p, str) for p in raw_scope):
        scope: list[str] = []
        for p in raw_scope:
            if not p.startswith("/") or ".." in p.split("/"):
                issues.append(
                    FieldIssue(RELATIVE_SCOPE_PATH, "scope_paths", f"not an absolute normalized path: {p!r}")
                )
            else:
                scope.append(_normalize_scope_path(p))
        values["scope_paths"] = tuple(scope)
    else:
        issues.append(FieldIssue(RELATIVE_SCOPE_PATH, "scope_paths", "expected a list of path strings"))

    dep = _parse_dependency_policy(document["dependency_policy"], issues)
    if dep is not None:
        values["dependency_policy"] = dep

    timeout = document["confirmation_timeout_s"]
    if isinstance(timeout, int) and not isinstance(timeout, bool) and timeout >= 1:
        values["confirmation_timeout_s"] = timeout
    else:
        issues.append(
            FieldIssue(NON_POSITIVE_TIMEOUT, "confirmation_timeout_s", f"must be an integer >= 1, got {timeout!r}")
        )

    if issues:
        raise ProfileValidationError(issues)
    return BoundaryProfile(**values)


def path_contained(path: str, prefixes: Iterable[str]) -> bool:
    """True when path sits under (or equals) one of the prefix paths."""
    for prefix in prefixes:
        if prefix == "/" or path == prefix or path.startswith(prefix + "/"):
            return True
    return False


def _scope_relation(a: tuple[str, ...], b: tuple[str, ...]) -> int | None:
    a_in_b = all(path_contained(p, b) for p in a)
    b_in_a = all(path_contained(p, a) for p in b)
    if a_in_b and b_in_a:
        return 0
    if a_in_b:
        return -1
    if b_in_a:
        return 1
    return None


def _dependency_relation(a: DependencyPolicy, b: DependencyPolicy) -> int | None:
    ia, ib = DEPENDENCY_ORDER.index(a.mode), DEPENDENCY_ORDER.index(b.mode)
    if ia != ib:
        return -1 if ia < ib else 1
    if a.mode is not DependencyMode.ALLOWLISTED_REGISTRIES:
        return 0
    sa, sb = set(a.registries), set(b.registries)
    if sa == sb:
        return 0
    if sa < sb:
        return -1
    if sb < sa:
        return 1
    return None


def compare_profiles(a: BoundaryProfile, b: BoundaryProfile) -> ProfileRelation:
    """Partial order over all eight fields; mixed directions are incomparable."""
    relations: list[int | None] = [
        _ordered_relation(a.persistence_ceiling, b.persistence_ceiling, PERSISTENCE_ORDER),
        _ordered_relation(a.exposure_ceiling, b.exposure_ceiling, EXPOSURE_ORDER),
        _ordered_relation(a.privilege_ceiling, b.privilege_ceiling, PRIVILEGE_ORDER),
        _scope_relation(a.scope_paths, b.scope_paths),
        _dependency_relation(a.dependency_policy, b.dependency_policy),
        _ordered_relation(a.destructive_policy, b.destructive_policy, DESTRUCTIVE_ORDER),
        _timeout_relation(a.confirmation_timeout_s, b.confirmation_timeout_s),
        _ordered_relation(a.strictness, b.strictness, STRICTNESS_ORDER),
    ]
    if any(r is None for r in relations):
        return ProfileRelation.INCOMPARABLE
    has_tighter = any(r == -1 for r in relations)
    has_looser = any(r == 1 for r in relations)
    if has_tighter and has_looser:
        return ProfileRelation.INCOMPARABLE
    if has_tighter:
        return ProfileRelation.TIGHTER
    if has_looser:
        return ProfileRelation.LOOSER
    return ProfileRelation.EQUAL


def _ordered_relation(a: Any, b: Any, order: tuple) -> int:
    ia, ib = order.index(a), order.index(b)
    return 0 if ia == ib else (-1 if ia < ib else 1)


def _timeout_relation(a: int, b: int) -> int:
    # A shorter confirmation window denies sooner, so it counts as tighter.
    return 0 if a == b else (-1 if a < b else 1)


PRESETS: dict[str, BoundaryProfile] = {
    "permissive": BoundaryProfile(
        persistence_ceiling=PersistenceCeiling.SYSTEM,
        exposure_ceiling=ExposureCeiling.PUBLIC,
        privilege_ceiling=PrivilegeCeiling.ELEVATED,
        scope_paths=("/",),
        dependency_policy=DependencyPolicy(DependencyMode.ANY),
        destructive_policy=DestructivePolicy.CONFIRM,
        confirmation_timeout_s=120,
        strictness=Strictness.PERMISSIVE,
    ),
    "standard": BoundaryProfile(
        persistence_ceiling=PersistenceCeiling.WORKSPACE,
        exposure_ceiling=ExposureCeiling.LOOPBACK,
        privilege_ceiling=PrivilegeCeiling.ELEVATED_WITH_CONFIRM,
        scope_paths=("/work",),
        dependency_policy=DependencyPolicy(DependencyMode.ANY_WITH_CONFIRM),
        destructive_policy=DestructivePolicy.CONFIRM,
        confirmation_timeout_s=120,
        strictness=Strictness.STANDARD,
    ),
    "strict": BoundaryProfile(
        persistence_ceiling=PersistenceCeiling.SESSION_LOCAL,
        exposure_ceiling=ExposureCeiling.NO_NETWORK,
        privilege_ceiling=PrivilegeCeiling.USER,
        scope_paths=("/work",),
        dependency_policy=DependencyPolicy(DependencyMode.ALLOWLISTED_REGISTRIES, ()),
        destructive_policy=DestructivePolicy.FORBID,
        confirmation_timeout_s=120,
        strictness=Strictness.STRICT,
    ),
}


@dataclass(frozen=True)
class Goal:
    text: str
    session_label: str = ""


@dataclass(frozen=True)
class PlanStep:
    index: int
    raw: str
    rationale: str = ""


@dataclass(frozen=True)
class Plan:
    plan_id: str
    goal: str
    steps: tuple[PlanStep, ...]

    def to_dict(self) -> dict[str, Any]:
        steps: list[Any] = [
            {"raw": s.raw, "rationale": s.rationale} if s.rationale else s.raw for s in self.steps
        ]
        return {"plan_id": self.plan_id, "goal": self.goal, "steps": steps}


# Plan document issue codes.
EMPTY_PLAN = "EmptyPlan"
EMPTY_STEP = "EmptyStep"
DUPLICATE_PLAN_ID = "DuplicatePlanId"
BAD_PLAN_DOCUMENT = "BadPlanDocument"


class PlanFormatError(ValueError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def load_plan(document: Any) -> Plan:
    """Parse a plan document {plan_id, goal, steps}; steps keep 0-based indices."""
    if not isinstance(document, dict):
        raise PlanFormatError(BAD_PLAN_DOCUMENT, "plan must be a JSON object")
    extra = set(document) - {"plan_id", "goal", "steps"}
    if extra:
        raise PlanFormatError(BAD_PLAN_DOCUMENT, f"unknown plan fields: {sorted(extra)}")
    plan_id = document.get("plan_id")
    goal = document.get("goal")
    steps = document.get("steps")
    if not isinstance(plan_id, str) or not plan_id:
        raise PlanFormatError(BAD_PLAN_DOCUMENT, "plan_id must be a non-empty string")
    if not isinstance(goal, str):
        raise PlanFormatError(BAD_PLAN_DOCUMENT, "goal must be a string")
    if not isinstance(steps, list):
        raise PlanFormatError(BAD_PLAN_DOCUMENT, "steps must be a list")
    if not steps:
        raise PlanFormatError(EMPTY_PLAN, "plan has no steps")
    parsed: list[PlanStep] = []
    for i, entry in enumerate(steps):
        rationale = ""
        if isinstance(entry, dict):
            extra = set(entry) - {"raw", "rationale"}
            if extra:
                raise PlanFormatError(BAD_PLAN_DOCUMENT, f"step {i}: unknown fields {sorted(extra)}")
            raw = entry.get("raw")
            rationale = entry.get("rationale", "")
            if not isinstance(rationale, str):
                raise PlanFormatError(BAD_PLAN_DOCUMENT, f"step {i}: rationale must be a string")
        else:
            if not isinstance(entry, str):
                raise PlanFormatError(BAD_PLAN_DOCUMENT, f"step {i}: expected a string or object")
            raw = entry
        if not isinstance(raw, str) or not raw.strip():
            raise PlanFormatError(EMPTY_STEP, f"step {i} is empty")
        parsed.append(PlanStep(index=i, raw=raw, rationale=rationale))
    return Plan(plan_id=plan_id, goal=goal, steps=tuple(parsed))
