"""Golden scenario corpus.

Each scenario pairs a goal with two plans for it: a risky variant whose
risk-class set is pinned exactly, and a conservative variant that must
stay at or under a stated verdict. The packaged scenarios ship with the
library; a directory of the same JSON shape can be run instead.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from typing import Any

from .plan_model import BoundaryProfile, PRESETS, Plan, PlanStep, Verdict, validate_profile
from .service import EngineSettings, annotate_plan, annotation_to_dict


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    goal: str
    preset: str | None
    profile_doc: dict[str, Any] | None
    conservative: tuple[str, ...]
    risky: tuple[str, ...]
    expected_risky_classes: frozenset[str]
    expected_conservative_max: Verdict

    def profile(self) -> BoundaryProfile:
        if self.preset is not None:
            return PRESETS[self.preset]
        return validate_profile(self.profile_doc)


def load_scenario(document: Any, origin: str = "<scenario>") -> Scenario:
    if not isinstance(document, dict):
        raise ScenarioError(f"{origin}: scenario must be a JSON object")
    try:
        name = document["name"]
        goal = document["goal"]
        plans = document["plans"]
        expected = document["expected"]
        conservative = tuple(plans["conservative"])
        risky = tuple(plans["risky"])
        classes = frozenset(expected["risky_classes"])
        max_verdict = Verdict(expected["conservative_max_verdict"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{origin}: malformed scenario: {exc}") from exc
    preset = document.get("preset")
    profile_doc = document.get("profile")
    if (preset is None) == (profile_doc is None):
        raise ScenarioError(f"{origin}: exactly one of preset/profile is required")
    if preset is not None and preset not in PRESETS:
        raise ScenarioError(f"{origin}: unknown preset {preset!r}")
    if not conservative or not risky:
        raise ScenarioError(f"{origin}: both plan variants need steps")
    return Scenario(
        name=name,
        goal=goal,
        preset=preset,
        profile_doc=profile_doc,
        conservative=conservative,
        risky=risky,
        expected_risky_classes=classes,
        expected_conservative_max=max_verdict,
    )


def load_packaged() -> list[Scenario]:
    scenarios = []
    root = resources.files("boundary_gate.corpus_data")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json") and entry.name != "host_fixture.json":
            scenarios.append(load_scenario(json.loads(entry.read_text("utf-8")), entry.name))
    if not scenarios:
        raise ScenarioError("no packaged scenarios found")
    return scenarios


def load_dir(path: str) -> list[Scenario]:
    scenarios = []
    for name in sorted(os.listdir(path)):
        if not name.endswith(".json"):
            continue
        full = os.path.join(path, name)
        with open(full, encoding="utf-8") as fh:
            scenarios.append(load_scenario(json.load(fh), full))
    if not scenarios:
        raise ScenarioError(f"no scenario files in {path!r}")
    return scenarios


@dataclass(frozen=True)
class ScenarioOutcome:
    name: str
    ok: bool
    problems: tuple[str, ...]
    risky_annotation: dict[str, Any]
    conservative_annotation: dict[str, Any]


def _plan(scenario: Scenario, variant: str, steps: tuple[str, ...]) -> Plan:
    return Plan(
        plan_id=f"{scenario.name}-{variant}",
        goal=scenario.goal,
        steps=tuple(PlanStep(index=i, raw=raw) for i, raw in enumerate(steps)),
    )


def run_scenario(scenario: Scenario, settings: EngineSettings = EngineSettings()) -> ScenarioOutcome:
    profile = scenario.profile()
    problems: list[str] = []

    risky = annotation_to_dict(
        annotate_plan(_plan(scenario, "risky", scenario.risky), profile, settings)
    )
    got_classes = set(risky["risk_classes"])
    if got_classes != set(scenario.expected_risky_classes):
        missing = sorted(scenario.expected_risky_classes - got_classes)
        extra = sorted(got_classes - scenario.expected_risky_classes)
        problems.append(f"risky classes differ (missing={missing}, extra={extra})")

    conservative = annotation_to_dict(
        annotate_plan(_plan(scenario, "conservative", scenario.conservative), profile, settings)
    )
    got_verdict = Verdict(conservative["verdict"]["decision"])
    if got_verdict.rank > scenario.expected_conservative_max.rank:
        problems.append(
            f"conservative verdict {got_verdict.value} exceeds "
            f"{scenario.expected_conservative_max.value}"
        )

    return ScenarioOutcome(
        name=scenario.name,
        ok=not problems,
        problems=tuple(problems),
        risky_annotation=risky,
        conservative_annotation=conservative,
    )


def run_all(
    scenarios: list[Scenario], settings: EngineSettings = EngineSettings()
) -> list[ScenarioOutcome]:
    return [run_scenario(s, settings) for s in scenarios]
