"""Typed host actions -> risk findings.

Each rule inspects one action at a time and reports at most one finding.
Severity may depend on declared scope, strictness, and dependency policy,
but never on the enforcement ceilings themselves; the policy engine owns
the verdict mapping.
"""

from __future__ import annotations

import fnmatch
import posixpath
from dataclasses import dataclass
from typing import Any, Callable, Iterable

from .action_parser import (
    ActionIR,
    ActionKind,
    ConfigEditAction,
    DownloadAction,
    ExecAction,
    FileDeleteAction,
    FileReadAction,
    FileWriteAction,
    FirewallAction,
    FirewallDirection,
    InterfaceClass,
    NetBindAction,
    PackageInstallAction,
    PersistenceDomain,
    ServiceControlAction,
    ServiceOp,
    scope_check,
    ScopeResult,
)
from .plan_model import (
    BoundaryProfile,
    DependencyMode,
    DependencyPolicy,
    RiskClass,
    Severity,
    Strictness,
)

# Longest matching prefix wins; anything unmatched is ephemeral.
DEFAULT_DOMAIN_TABLE: tuple[tuple[str, PersistenceDomain], ...] = (
    ("/work", PersistenceDomain.WORKSPACE),
    ("/home", PersistenceDomain.USER_PROFILE),
    ("/root", PersistenceDomain.USER_PROFILE),
    ("/etc", PersistenceDomain.SYSTEM),
    ("/usr", PersistenceDomain.SYSTEM),
    ("/lib", PersistenceDomain.SYSTEM),
    ("/var", PersistenceDomain.SYSTEM),
    ("/boot", PersistenceDomain.SYSTEM),
)

DEFAULT_SENSITIVE_PATTERNS: tuple[str, ...] = (
    ".env",
    ".env.*",
    "id_rsa*",
    "id_ed25519*",
    "*credentials*",
    "*.pem",
    "*token*",
    "*secret*",
)

_CONFIG_NAME_PATTERNS = (
    "*.conf", "*.cfg", "*.ini", "*.yaml", "*.yml", "*.toml", "*.json", "config*", "*.config",
)

_PROTECTIVE_SERVICES = frozenset({"apparmor", "firewalld", "selinux", "auditd", "ufw"})

_AUTH_OFF_TOKENS = frozenset(
    {
        "--no-auth",
        "--disable-auth",
        "--auth=none",
        "--anonymous",
        "--allow-anonymous",
        "--auth-mode=none",
    }
)

_CHECKS_OFF_TOKENS = frozenset(
    {"--no-verify", "--skip-checks", "--force", "--no-check-certificate", "--insecure"}
)


def domain_of(path: str, table: tuple[tuple[str, PersistenceDomain], ...]) -> PersistenceDomain:
    best: tuple[int, PersistenceDomain] | None = None
    for prefix, domain in table:
        if path == prefix or path.startswith(prefix.rstrip("/") + "/"):
            if best is None or len(prefix) > best[0]:
                best = (len(prefix), domain)
    return best[1] if best else PersistenceDomain.EPHEMERAL


@dataclass(frozen=True)
class ClassificationContext:
    """Profile-derived facts a rule may consult."""

    scope_paths: tuple[str, ...]
    strictness: Strictness
    dependency_policy: DependencyPolicy
    domain_table: tuple[tuple[str, PersistenceDomain], ...] = DEFAULT_DOMAIN_TABLE
    sensitive_patterns: tuple[str, ...] = DEFAULT_SENSITIVE_PATTERNS

    @classmethod
    def from_profile(
        cls,
        profile: BoundaryProfile,
        *,
        domain_table: tuple[tuple[str, PersistenceDomain], ...] = DEFAULT_DOMAIN_TABLE,
    ) -> "ClassificationContext":
        return cls(
            scope_paths=profile.scope_paths,
            strictness=profile.strictness,
            dependency_policy=profile.dependency_policy,
            domain_table=domain_table,
        )


@dataclass(frozen=True)
class Finding:
    rule_id: str
    risk_class: RiskClass | None  # None marks the unparsed-input sentinel
    severity: Severity
    detail: str
    action_index: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "risk_class": self.risk_class.value if self.risk_class else "UNKNOWN",
            "severity": self.severity.value,
            "detail": self.detail,
            "action_index": self.action_index,
        }


_Check = Callable[[ActionIR, ClassificationContext], "tuple[Severity, str] | None"]


@dataclass(frozen=True)
class Rule:
    rule_id: str
    risk_class: RiskClass | None
    kinds: frozenset[ActionKind]
    check: _Check
    description: str


def _is_sensitive(path: str, patterns: tuple[str, ...]) -> bool:
    name = posixpath.basename(path).lower()
    return any(fnmatch.fnmatch(name, p.lower()) for p in patterns)


def _looks_like_config(path: str) -> bool:
    if path == "/etc" or path.startswith("/etc/"):
        return True
    name = posixpath.basename(path).lower()
    return any(fnmatch.fnmatch(name, p) for p in _CONFIG_NAME_PATTERNS)


def _domain_path(action: ActionIR) -> str | None:
    if isinstance(action, (FileWriteAction, FileDeleteAction, ConfigEditAction)):
        return action.path
    if isinstance(action, DownloadAction):
        return action.target_path
    return None


def _action_domain(action: ActionIR, ctx: ClassificationContext) -> PersistenceDomain | None:
    if isinstance(action, ConfigEditAction):
        return action.persistence_domain
    path = _domain_path(action)
    if path is None:
        return None
    return domain_of(path, ctx.domain_table)


# --- rule predicates ----------------------------------------------------


def _priv_sudo(action: ActionIR, ctx: ClassificationContext):
    if not action.sudo:
        return None
    if isinstance(action, ConfigEditAction) and action.persistence_domain is PersistenceDomain.SYSTEM:
        return Severity.HIGH, "sudo used to edit system configuration"
    return Severity.MEDIUM, "command requests superuser privileges"


def _priv_chmod_wide(action: ActionIR, ctx: ClassificationContext):
    if not isinstance(action, ExecAction) or not action.perm_widening:
        return None
    modes = [m for m in action.perm_widening if m != "-R"]
    if action.program == "chmod" and modes:
        return Severity.HIGH, f"permission widening ({', '.join(modes)})"
    if action.program == "chown" and "-R" in action.perm_widening:
        return Severity.HIGH, "recursive ownership change"
    return None


def _priv_protect_off(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, ExecAction):
        if action.program == "setenforce" and action.argv[:1] == ("0",):
            return Severity.HIGH, "disables mandatory access control"
        if action.program == "ufw" and "disable" in action.argv:
            return Severity.HIGH, "disables the firewall"
        return None
    if isinstance(action, ServiceControlAction):
        if action.service in _PROTECTIVE_SERVICES and action.op in (
            ServiceOp.STOP,
            ServiceOp.DISABLE,
        ):
            return Severity.HIGH, f"stops protective service {action.service}"
    return None


def _overreach_out_of_scope(action: ActionIR, ctx: ClassificationContext):
    if scope_check(action, ctx.scope_paths) is not ScopeResult.OUT_OF_SCOPE:
        return None
    path = action.path  # read and delete actions always carry one
    if _is_sensitive(path, ctx.sensitive_patterns):
        return Severity.HIGH, f"touches sensitive file outside declared scope: {path}"
    return Severity.MEDIUM, f"outside declared scope: {path}"


def _overreach_scan(action: ActionIR, ctx: ClassificationContext):
    if not isinstance(action, FileReadAction) or not action.recursive:
        return None
    if scope_check(action, ctx.scope_paths) is ScopeResult.OUT_OF_SCOPE:
        return Severity.MEDIUM, f"recursive scan rooted outside declared scope: {action.path}"
    return None


def _persist_sysconf(action: ActionIR, ctx: ClassificationContext):
    if _action_domain(action, ctx) is PersistenceDomain.SYSTEM:
        return Severity.HIGH, "persistent change to system configuration"
    return None


def _persist_userprofile(action: ActionIR, ctx: ClassificationContext):
    if _action_domain(action, ctx) is PersistenceDomain.USER_PROFILE:
        return Severity.MEDIUM, "persistent change to the user profile"
    return None


def _persist_workspace(action: ActionIR, ctx: ClassificationContext):
    if _action_domain(action, ctx) is PersistenceDomain.WORKSPACE:
        return Severity.LOW, "writes into the workspace"
    return None


def _persist_pkg_system(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, PackageInstallAction) and action.system_wide:
        return Severity.MEDIUM, f"system-wide install via {action.manager}"
    return None


def _persist_pkg_local(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, PackageInstallAction) and not action.system_wide:
        return Severity.LOW, f"project-local install via {action.manager}"
    return None


def _persist_service_enable(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, ServiceControlAction) and action.op in (
        ServiceOp.ENABLE,
        ServiceOp.DISABLE,
    ):
        return Severity.MEDIUM, f"changes boot-time state of {action.service}"
    return None


def _expo_wildcard_bind(action: ActionIR, ctx: ClassificationContext):
    if not isinstance(action, NetBindAction) or action.tunnel:
        return None
    if action.interface_class in (InterfaceClass.WILDCARD, InterfaceClass.PUBLIC):
        return Severity.HIGH, f"listens on {action.address}:{action.port or '?'}"
    return None


def _expo_private_bind(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, NetBindAction) and not action.tunnel:
        if action.interface_class is InterfaceClass.PRIVATE:
            return Severity.LOW, f"listens on private interface {action.address}"
    return None


def _expo_firewall_open(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, FirewallAction) and action.direction is FirewallDirection.OPEN:
        port = action.target_port if action.target_port is not None else "?"
        return Severity.HIGH, f"opens firewall port {port}"
    return None


def _expo_tunnel(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, NetBindAction) and action.tunnel:
        return Severity.HIGH, "publishes a local port through an external tunnel"
    return None


def _expo_auth_off(action: ActionIR, ctx: ClassificationContext):
    if not isinstance(action, ExecAction):
        return None
    argv = action.argv
    hit = _AUTH_OFF_TOKENS.intersection(argv)
    for i, arg in enumerate(argv[:-1]):
        if arg in ("--auth", "--auth-mode") and argv[i + 1] == "none":
            hit = hit | {f"{arg} none"}
    if hit:
        return Severity.HIGH, f"disables authentication ({sorted(hit)[0]})"
    return None


def _dep_new_repo(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, PackageInstallAction) and action.added_repository:
        return Severity.HIGH, f"adds package source {action.added_repository}"
    return None


def _dep_pipe_sh(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, DownloadAction) and action.executed_inline:
        return Severity.HIGH, "pipes downloaded content into an interpreter"
    return None


def _dep_third_party(action: ActionIR, ctx: ClassificationContext):
    """Fires only when the declared dependency policy rejects this source."""
    if not isinstance(action, PackageInstallAction):
        return None
    policy = ctx.dependency_policy
    if policy.mode is DependencyMode.FORBID:
        return Severity.MEDIUM, "dependency introduction is forbidden by the profile"
    if policy.mode is DependencyMode.ALLOWLISTED_REGISTRIES:
        if action.registry not in policy.registries:
            return Severity.MEDIUM, f"registry {action.registry or 'unknown'} is not allowlisted"
    return None


def _destr_rm_force(action: ActionIR, ctx: ClassificationContext):
    if not isinstance(action, FileDeleteAction) or not (action.recursive or action.force):
        return None
    if scope_check(action, ctx.scope_paths) is ScopeResult.OUT_OF_SCOPE:
        return Severity.HIGH, f"forced removal outside declared scope: {action.path}"
    return Severity.MEDIUM, f"forced removal of {action.path}"


def _destr_overwrite_conf(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, (FileWriteAction, ConfigEditAction)) and action.force:
        if _looks_like_config(action.path):
            return Severity.MEDIUM, f"clobbers configuration file {action.path}"
    return None


def _destr_force_restart(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, ServiceControlAction) and action.op is ServiceOp.FORCE_RESTART:
        return Severity.MEDIUM, f"kills {action.service} without graceful shutdown"
    return None


def _destr_checks_off(action: ActionIR, ctx: ClassificationContext):
    if isinstance(action, ExecAction):
        hit = _CHECKS_OFF_TOKENS.intersection(action.argv)
        if hit:
            return Severity.MEDIUM, f"bypasses a safety check ({sorted(hit)[0]})"
        return None
    if isinstance(action, DownloadAction):
        tokens = set(action.source.split())
        hit = tokens & {"--no-check-certificate", "--insecure", "-k"}
        if hit:
            return Severity.MEDIUM, f"disables transfer verification ({sorted(hit)[0]})"
    return None


def _unknown_action(action: ActionIR, ctx: ClassificationContext):
    if ctx.strictness is Strictness.PERMISSIVE:
        return None
    return Severity.MEDIUM, "command could not be interpreted"


_FILE_KINDS = frozenset({ActionKind.FILE_WRITE, ActionKind.FILE_DELETE, ActionKind.CONFIG_EDIT, ActionKind.DOWNLOAD})
_ALL_KINDS = frozenset(ActionKind) - {ActionKind.UNKNOWN}

RULES: tuple[Rule, ...] = (
    Rule(
        "PRIV_SUDO",
        RiskClass.PRIVILEGE_EXPANSION,
        _ALL_KINDS,
        _priv_sudo,
        "Superuser invocation",
    ),
    Rule(
        "PRIV_CHMOD_WIDE",
        RiskClass.PRIVILEGE_EXPANSION,
        frozenset({ActionKind.EXEC}),
        _priv_chmod_wide,
        "Permission or ownership widening",
    ),
    Rule(
        "PRIV_PROTECT_OFF",
        RiskClass.PRIVILEGE_EXPANSION,
        frozenset({ActionKind.EXEC, ActionKind.SERVICE_CONTROL}),
        _priv_protect_off,
        "Protective mechanism switched off",
    ),
    Rule(
        "OVERREACH_OUT_OF_SCOPE",
        RiskClass.SENSITIVE_RESOURCE_OVERREACH,
        frozenset({ActionKind.FILE_READ, ActionKind.FILE_DELETE}),
        _overreach_out_of_scope,
        "Read or delete outside declared scope",
    ),
    Rule(
        "OVERREACH_SCAN",
        RiskClass.SENSITIVE_RESOURCE_OVERREACH,
        frozenset({ActionKind.FILE_READ}),
        _overreach_scan,
        "Recursive scan outside declared scope",
    ),
    Rule(
        "PERSIST_SYSCONF",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        _FILE_KINDS,
        _persist_sysconf,
        "System configuration change",
    ),
    Rule(
        "PERSIST_USERPROFILE",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        _FILE_KINDS,
        _persist_userprofile,
        "User profile change",
    ),
    Rule(
        "PERSIST_WORKSPACE_WRITE",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        _FILE_KINDS,
        _persist_workspace,
        "Workspace write",
    ),
    Rule(
        "PERSIST_PKG_SYSTEM",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        frozenset({ActionKind.PACKAGE_INSTALL}),
        _persist_pkg_system,
        "System-wide package install",
    ),
    Rule(
        "PERSIST_PKG_LOCAL",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        frozenset({ActionKind.PACKAGE_INSTALL}),
        _persist_pkg_local,
        "Project-local package install",
    ),
    Rule(
        "PERSIST_SERVICE_ENABLE",
        RiskClass.PERSISTENT_HOST_MODIFICATION,
        frozenset({ActionKind.SERVICE_CONTROL}),
        _persist_service_enable,
        "Service boot-state change",
    ),
    Rule(
        "EXPO_WILDCARD_BIND",
        RiskClass.EXPOSURE_ENLARGEMENT,
        frozenset({ActionKind.NET_BIND}),
        _expo_wildcard_bind,
        "Listener on a wildcard or public interface",
    ),
    Rule(
        "EXPO_PRIVATE_BIND",
        RiskClass.EXPOSURE_ENLARGEMENT,
        frozenset({ActionKind.NET_BIND}),
        _expo_private_bind,
        "Listener on a private interface",
    ),
    Rule(
        "EXPO_FIREWALL_OPEN",
        RiskClass.EXPOSURE_ENLARGEMENT,
        frozenset({ActionKind.FIREWALL_CHANGE}),
        _expo_firewall_open,
        "Inbound firewall opening",
    ),
    Rule(
        "EXPO_TUNNEL",
        RiskClass.EXPOSURE_ENLARGEMENT,
        frozenset({ActionKind.NET_BIND}),
        _expo_tunnel,
        "External tunnel",
    ),
    Rule(
        "EXPO_AUTH_OFF",
        RiskClass.EXPOSURE_ENLARGEMENT,
        frozenset({ActionKind.EXEC}),
        _expo_auth_off,
        "Authentication disabled on a served endpoint",
    ),
    Rule(
        "DEP_NEW_REPO",
        RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION,
        frozenset({ActionKind.PACKAGE_INSTALL}),
        _dep_new_repo,
        "New package source",
    ),
    Rule(
        "DEP_PIPE_SH",
        RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION,
        frozenset({ActionKind.DOWNLOAD}),
        _dep_pipe_sh,
        "Download piped into an interpreter",
    ),
    Rule(
        "DEP_THIRD_PARTY",
        RiskClass.UNSAFE_DEPENDENCY_INTRODUCTION,
        frozenset({ActionKind.PACKAGE_INSTALL}),
        _dep_third_party,
        "Install rejected by the dependency policy",
    ),
    Rule(
        "DESTR_RM_FORCE",
        RiskClass.DESTRUCTIVE_REPAIR,
        frozenset({ActionKind.FILE_DELETE}),
        _destr_rm_force,
        "Recursive or forced removal",
    ),
    Rule(
        "DESTR_OVERWRITE_CONF",
        RiskClass.DESTRUCTIVE_REPAIR,
        frozenset({ActionKind.FILE_WRITE, ActionKind.CONFIG_EDIT}),
        _destr_overwrite_conf,
        "Forced overwrite of a configuration file",
    ),
    Rule(
        "DESTR_FORCE_RESTART",
        RiskClass.DESTRUCTIVE_REPAIR,
        frozenset({ActionKind.SERVICE_CONTROL}),
        _destr_force_restart,
        "Ungraceful service kill",
    ),
    Rule(
        "DESTR_CHECKS_OFF",
        RiskClass.DESTRUCTIVE_REPAIR,
        frozenset({ActionKind.EXEC, ActionKind.DOWNLOAD}),
        _destr_checks_off,
        "Safety checks bypassed",
    ),
    Rule(
        "UNKNOWN_ACTION",
        None,
        frozenset({ActionKind.UNKNOWN}),
        _unknown_action,
        "Uninterpreted command",
    ),
)

_RULES_BY_ID = {rule.rule_id: rule for rule in RULES}

_BY_KIND: dict[ActionKind, tuple[Rule, ...]] = {
    kind: tuple(rule for rule in RULES if kind in rule.kinds) for kind in ActionKind
}


def rule_catalog() -> tuple[Rule, ...]:
    return RULES


def classify_action(action: ActionIR, ctx: ClassificationContext, *, action_index: int = 0) -> list[Finding]:
    findings = []
    for rule in _BY_KIND[action.kind]:
        hit = rule.check(action, ctx)
        if hit is not None:
            severity, detail = hit
            findings.append(
                Finding(
                    rule_id=rule.rule_id,
                    risk_class=rule.risk_class,
                    severity=severity,
                    detail=detail,
                    action_index=action_index,
                )
            )
    findings.sort(key=lambda f: f.rule_id)
    return findings


def classify_actions(actions: Iterable[ActionIR], ctx: ClassificationContext) -> list[Finding]:
    out: list[Finding] = []
    for i, action in enumerate(actions):
        out.extend(classify_action(action, ctx, action_index=i))
    return out


def naive_classify_actions(actions: Iterable[ActionIR], ctx: ClassificationContext) -> list[Finding]:
    """Reference implementation: a flat scan over the whole catalog.

    Exists so the indexed dispatch above can be checked against something
    with no shared machinery.
    """
    out: list[Finding] = []
    for i, action in enumerate(actions):
        per_action: list[Finding] = []
        for rule in RULES:
            if action.kind not in rule.kinds:
                continue
            hit = rule.check(action, ctx)
            if hit is None:
                continue
            severity, detail = hit
            per_action.append(
                Finding(
                    rule_id=rule.rule_id,
                    risk_class=rule.risk_class,
                    severity=severity,
                    detail=detail,
                    action_index=i,
                )
            )
        out.extend(sorted(per_action, key=lambda f: f.rule_id))
    return out


def risk_classes_of(findings: Iterable[Finding]) -> list[RiskClass]:
    present = {f.risk_class for f in findings if f.risk_class is not None}
    return sorted(present, key=lambda c: c.value)
