"""Boundary gate: plan interception, risk classification, and enforcement."""

from .plan_model import (
    BoundaryProfile,
    DependencyMode,
    DependencyPolicy,
    DestructivePolicy,
    ExposureCeiling,
    PersistenceCeiling,
    Plan,
    PlanStep,
    PrivilegeCeiling,
    ProfileRelation,
    PRESETS,
    RiskClass,
    Severity,
    Strictness,
    Verdict,
    compare_profiles,
    load_plan,
    validate_profile,
)
from .action_parser import ActionKind, parse_command
from .risk_classifier import ClassificationContext, Finding, classify_actions
from .policy_engine import judge_findings, judge_plan
from .service import EngineSettings, GatewayService, annotate_plan, annotation_to_dict

__version__ = "0.1.0"

__all__ = [
    "ActionKind",
    "BoundaryProfile",
    "ClassificationContext",
    "DependencyMode",
    "DependencyPolicy",
    "DestructivePolicy",
    "EngineSettings",
    "ExposureCeiling",
    "Finding",
    "GatewayService",
    "PersistenceCeiling",
    "Plan",
    "PlanStep",
    "PRESETS",
    "PrivilegeCeiling",
    "ProfileRelation",
    "RiskClass",
    "Severity",
    "Strictness",
    "Verdict",
    "annotate_plan",
    "annotation_to_dict",
    "classify_actions",
    "compare_profiles",
    "judge_findings",
    "judge_plan",
    "load_plan",
    "parse_command",
    "validate_profile",
    "__version__",
]
