"""Command-line front end.

Exit codes are part of the contract:
  0 every step allowed          3 at least one step needs elevation
  2 usage or input format error 4 at least one step denied
  5 trace verification failed   6 corpus expectation failed
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Any

from . import corpus as corpus_mod
from .action_parser import InputTooLargeError, RuleLoadError
from .audit_trace import StorageFailure, verify_file
from .gateway import ConfigError, load_config, serve, settings_from_config
from .host_sim import FixtureError
from .plan_model import (
    PRESETS,
    PlanFormatError,
    ProfileValidationError,
    Verdict,
    load_plan,
    validate_profile,
)
from .policy_engine import PolicyTableError
from .risk_classifier import RULES
from .service import EngineSettings, annotate_plan, annotation_to_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ELEVATE = 3
EXIT_DENY = 4
EXIT_TRACE_BAD = 5
EXIT_CORPUS_BAD = 6

_VERDICT_EXIT = {Verdict.ALLOW: EXIT_OK, Verdict.ELEVATE: EXIT_ELEVATE, Verdict.DENY: EXIT_DENY}


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _read_json(path: str) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _settings(args: argparse.Namespace) -> EngineSettings:
    return EngineSettings.from_paths(
        rules_path=getattr(args, "rules", None),
        policy_table_path=getattr(args, "policy_table", None),
    )


def _print_text(annotated: dict[str, Any]) -> None:
    verdict = annotated["verdict"]
    blocking = ", ".join(str(i) for i in verdict["blocking_steps"])
    suffix = f" (blocking steps: {blocking})" if blocking else ""
    print(f"plan {annotated['plan_id']}: {verdict['decision']}{suffix}")
    if annotated["risk_classes"]:
        print(f"risk classes: {', '.join(annotated['risk_classes'])}")
    for step in annotated["steps"]:
        print(f"  [{step['index']}] {step['verdict']['decision']:<7} {step['raw']}")
        for line in step["verdict"]["rationale"]:
            print(f"          {line}")


def _cmd_check(args: argparse.Namespace) -> int:
    try:
        plan_doc = _read_json(args.plan)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"cannot load plan: {exc}")
    try:
        plan = load_plan(plan_doc)
    except PlanFormatError as exc:
        return _fail(f"bad plan: {exc}")

    if args.preset:
        profile = PRESETS[args.preset]
    else:
        try:
            profile = validate_profile(_read_json(args.profile))
        except (OSError, json.JSONDecodeError) as exc:
            return _fail(f"cannot load profile: {exc}")
        except ProfileValidationError as exc:
            for issue in exc.issues:
                print(f"error: profile: {issue.code}({issue.field}): {issue.message}", file=sys.stderr)
            return EXIT_USAGE

    try:
        settings = _settings(args)
    except (RuleLoadError, PolicyTableError, FixtureError) as exc:
        return _fail(str(exc))

    try:
        annotated = annotation_to_dict(annotate_plan(plan, profile, settings))
    except InputTooLargeError as exc:
        return _fail(str(exc))

    if args.format == "json":
        print(json.dumps(annotated, indent=2))
    else:
        _print_text(annotated)
    return _VERDICT_EXIT[Verdict(annotated["verdict"]["decision"])]


def _cmd_corpus(args: argparse.Namespace) -> int:
    try:
        scenarios = corpus_mod.load_dir(args.dir) if args.dir else corpus_mod.load_packaged()
        settings = _settings(args)
    except (corpus_mod.ScenarioError, OSError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    except (RuleLoadError, PolicyTableError) as exc:
        return _fail(str(exc))

    failures = 0
    for outcome in corpus_mod.run_all(scenarios, settings):
        if outcome.ok:
            print(f"PASS {outcome.name}")
        else:
            failures += 1
            print(f"FAIL {outcome.name}")
            for problem in outcome.problems:
                print(f"     {problem}")
    print(f"{len(scenarios) - failures}/{len(scenarios)} scenarios passed")
    return EXIT_CORPUS_BAD if failures else EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    overrides = {
        "listen": args.listen,
        "data_dir": args.data_dir,
        "strictness": args.strictness,
        "rules_path": args.rules,
        "policy_table_path": args.policy_table,
        "host_fixture_path": args.host_fixture,
    }
    try:
        config = load_config(args.config, overrides)
        serve(config, allow_public_listen=args.allow_public_listen)
    except (ConfigError, RuleLoadError, PolicyTableError, FixtureError) as exc:
        return _fail(str(exc))
    return EXIT_OK


def _cmd_trace_verify(args: argparse.Namespace) -> int:
    try:
        result = verify_file(args.trace)
    except StorageFailure as exc:
        return _fail(str(exc))
    if result.ok:
        print("Ok")
        return EXIT_OK
    print(f"FirstBadIndex {result.first_bad_index}")
    return EXIT_TRACE_BAD


def _cmd_rules_list(_args: argparse.Namespace) -> int:
    for rule in RULES:
        risk = rule.risk_class.value if rule.risk_class else "UNKNOWN"
        print(f"{rule.rule_id:<24} {risk:<32} {rule.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bgate", description="Boundary gate for host-acting plans")
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="judge a plan file offline")
    check.add_argument("plan", help="path to a plan JSON file")
    who = check.add_mutually_exclusive_group(required=True)
    who.add_argument("--profile", help="path to a boundary profile JSON file")
    who.add_argument("--preset", choices=sorted(PRESETS), help="named boundary preset")
    check.add_argument("--rules", help="path to a custom recognizer rules file")
    check.add_argument("--policy-table", help="path to a policy table override file")
    check.add_argument("--format", choices=("text", "json"), default="text")
    check.set_defaults(func=_cmd_check)

    corpus = sub.add_parser("corpus", help="run the golden scenario corpus")
    corpus.add_argument("dir", nargs="?", help="scenario directory (default: packaged corpus)")
    corpus.add_argument("--rules", help="path to a custom recognizer rules file")
    corpus.add_argument("--policy-table", help="path to a policy table override file")
    corpus.set_defaults(func=_cmd_corpus)

    srv = sub.add_parser("serve", help="run the HTTP gateway")
    srv.add_argument("--config", help="config file (default: $BGATE_CONFIG)")
    srv.add_argument("--listen", help="host:port to bind (default 127.0.0.1:8787)")
    srv.add_argument("--data-dir", help="where traces are stored")
    srv.add_argument("--strictness", choices=("PERMISSIVE", "STANDARD", "STRICT"),
                     help="strictness floor applied to every session")
    srv.add_argument("--rules", help="path to a custom recognizer rules file")
    srv.add_argument("--policy-table", help="path to a policy table override file")
    srv.add_argument("--host-fixture", help="initial simulated host state")
    srv.add_argument("--allow-public-listen", action="store_true",
                     help="permit binding a wildcard address")
    srv.set_defaults(func=_cmd_serve)

    trace = sub.add_parser("trace", help="trace file tools")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True)
    verify = trace_sub.add_parser("verify", help="verify a trace file's hash chain")
    verify.add_argument("trace", help="path to a session trace (.jsonl)")
    verify.set_defaults(func=_cmd_trace_verify)

    rules = sub.add_parser("rules", help="recognizer rule tools")
    rules_sub = rules.add_subparsers(dest="rules_command", required=True)
    rules_list = rules_sub.add_parser("list", help="list the built-in risk rules")
    rules_list.set_defaults(func=_cmd_rules_list)

    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
