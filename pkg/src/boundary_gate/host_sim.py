"""Deterministic host model.

Applies one step's typed actions to an in-memory host state and reports
the resulting delta. Execs and unknown commands never mutate state; they
only leave an unmodeled marker, so every recorded change is one the
ceiling check can reason about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable

from .action_parser import (
    ActionIR,
    ConfigEditAction,
    DownloadAction,
    ExecAction,
    FileDeleteAction,
    FileWriteAction,
    FirewallAction,
    FirewallDirection,
    InterfaceClass,
    NetBindAction,
    PackageInstallAction,
    PersistenceDomain,
    ServiceControlAction,
    ServiceOp,
    UnknownAction,
)
from .plan_model import (
    BoundaryProfile,
    EXPOSURE_ORDER,
    ExposureCeiling,
    PERSISTENCE_ORDER,
    PRIVILEGE_ORDER,
    PersistenceCeiling,
    PrivilegeCeiling,
)
from .risk_classifier import DEFAULT_DOMAIN_TABLE, domain_of


@dataclass(frozen=True)
class ServiceState:
    running: bool = False
    enabled: bool = False


@dataclass
class HostState:
    files: dict[str, bool] = field(default_factory=dict)  # path -> mode_wide
    services: dict[str, ServiceState] = field(default_factory=dict)
    packages: set[str] = field(default_factory=set)
    binds: set[tuple[str, int]] = field(default_factory=set)
    firewall_open: set[int] = field(default_factory=set)

    def clone(self) -> "HostState":
        return HostState(
            files=dict(self.files),
            services=dict(self.services),
            packages=set(self.packages),
            binds=set(self.binds),
            firewall_open=set(self.firewall_open),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "files": {p: {"mode_wide": w} for p, w in sorted(self.files.items())},
            "services": {
                n: {"running": s.running, "enabled": s.enabled}
                for n, s in sorted(self.services.items())
            },
            "packages": sorted(self.packages),
            "binds": sorted([a, p] for a, p in self.binds),
            "firewall_open": sorted(self.firewall_open),
        }


class FixtureError(ValueError):
    pass


def initial_state(fixture: dict[str, Any] | None = None) -> HostState:
    state = HostState()
    if fixture is None:
        return state
    if not isinstance(fixture, dict):
        raise FixtureError("host fixture must be a JSON object")
    files = fixture.get("files", {})
    if not isinstance(files, dict):
        raise FixtureError("fixture files must be an object")
    for path, meta in files.items():
        mode_wide = bool(meta.get("mode_wide", False)) if isinstance(meta, dict) else False
        state.files[path] = mode_wide
    for name, meta in fixture.get("services", {}).items():
        if not isinstance(meta, dict):
            raise FixtureError(f"fixture service {name!r} must be an object")
        state.services[name] = ServiceState(
            running=bool(meta.get("running", False)), enabled=bool(meta.get("enabled", False))
        )
    state.packages.update(fixture.get("packages", []))
    for entry in fixture.get("binds", []):
        state.binds.add((entry[0], int(entry[1])))
    state.firewall_open.update(int(p) for p in fixture.get("firewall_open", []))
    return state


def load_fixture_file(path: str) -> HostState:
    try:
        with open(path, encoding="utf-8") as fh:
            return initial_state(json.load(fh))
    except OSError as exc:
        raise FixtureError(f"cannot read host fixture: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureError(f"host fixture is not valid JSON: {exc}") from exc


@dataclass(frozen=True)
class StateDelta:
    created: tuple[str, ...] = ()
    modified: tuple[str, ...] = ()
    deleted: tuple[str, ...] = ()
    new_binds: tuple[tuple[str, int, str], ...] = ()
    new_firewall_opens: tuple[int, ...] = ()
    new_packages: tuple[tuple[str, bool], ...] = ()
    service_transitions: tuple[tuple[str, str, bool, bool], ...] = ()
    unmodeled: tuple[str, ...] = ()
    sudo_used: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "created": list(self.created),
            "modified": list(self.modified),
            "deleted": list(self.deleted),
            "new_binds": [[a, p, c] for a, p, c in self.new_binds],
            "new_firewall_opens": list(self.new_firewall_opens),
            "new_packages": [[n, w] for n, w in self.new_packages],
            "service_transitions": [[s, f, o, n] for s, f, o, n in self.service_transitions],
            "unmodeled": list(self.unmodeled),
            "sudo_used": self.sudo_used,
        }


def apply_step(state: HostState, actions: Iterable[ActionIR]) -> tuple[HostState, StateDelta]:
    """Pure: returns the next state and what changed; never mutates the input."""
    next_state = state.clone()
    before = set(state.files)
    touched: set[str] = set()
    new_binds: list[tuple[str, int, str]] = []
    new_firewall: list[int] = []
    new_packages: list[tuple[str, bool]] = []
    transitions: list[tuple[str, str, bool, bool]] = []
    unmodeled: list[str] = []
    sudo_used = False

    def write(path: str) -> None:
        touched.add(path)
        next_state.files.setdefault(path, False)

    def delete(path: str, recursive: bool) -> None:
        victims = [p for p in next_state.files if p == path or (recursive and p.startswith(path + "/"))]
        if not victims and path in before:
            victims = [path]
        for victim in victims:
            touched.add(victim)
            next_state.files.pop(victim, None)
        if not victims:
            touched.add(path)  # deleting nothing still names the target

    for action in actions:
        if action.sudo:
            sudo_used = True
        if isinstance(action, (FileWriteAction, ConfigEditAction)):
            write(action.path)
        elif isinstance(action, DownloadAction):
            if action.target_path:
                write(action.target_path)
            if action.executed_inline:
                unmodeled.append(f"inline-script:{action.url}")
        elif isinstance(action, FileDeleteAction):
            delete(action.path, action.recursive)
        elif isinstance(action, NetBindAction):
            key = (action.address, action.port)
            if key not in next_state.binds:
                next_state.binds.add(key)
                new_binds.append((action.address, action.port, action.interface_class.value))
        elif isinstance(action, FirewallAction):
            port = action.target_port if action.target_port is not None else 0
            if action.direction is FirewallDirection.OPEN:
                if port not in next_state.firewall_open:
                    next_state.firewall_open.add(port)
                    new_firewall.append(port)
            else:
                next_state.firewall_open.discard(port)
        elif isinstance(action, PackageInstallAction):
            names = list(action.packages) or (
                [f"repo:{action.added_repository}"] if action.added_repository else []
            )
            for name in names:
                key = f"{action.manager}:{name}"
                if key not in next_state.packages:
                    next_state.packages.add(key)
                    new_packages.append((key, action.system_wide))
        elif isinstance(action, ServiceControlAction):
            old = next_state.services.get(action.service, ServiceState())
            if action.op in (ServiceOp.START, ServiceOp.RESTART, ServiceOp.FORCE_RESTART):
                new = ServiceState(running=True, enabled=old.enabled)
                transitions.append((action.service, "running", old.running, True))
            elif action.op is ServiceOp.STOP:
                new = ServiceState(running=False, enabled=old.enabled)
                transitions.append((action.service, "running", old.running, False))
            elif action.op is ServiceOp.ENABLE:
                new = ServiceState(running=old.running, enabled=True)
                transitions.append((action.service, "enabled", old.enabled, True))
            else:  # DISABLE
                new = ServiceState(running=old.running, enabled=False)
                transitions.append((action.service, "enabled", old.enabled, False))
            next_state.services[action.service] = new
        elif isinstance(action, ExecAction):
            unmodeled.append(f"exec:{action.program}")
        elif isinstance(action, UnknownAction):
            unmodeled.append("unknown-command")

    after = set(next_state.files)
    created = tuple(sorted(touched - before))
    deleted = tuple(sorted((touched & before) - after))
    modified = tuple(sorted((touched & before) & after))
    # a path created and removed inside one step nets out to nothing
    created = tuple(p for p in created if p in after)
    return next_state, StateDelta(
        created=created,
        modified=modified,
        deleted=deleted,
        new_binds=tuple(new_binds),
        new_firewall_opens=tuple(new_firewall),
        new_packages=tuple(new_packages),
        service_transitions=tuple(transitions),
        unmodeled=tuple(unmodeled),
        sudo_used=sudo_used,
    )


@dataclass(frozen=True)
class CeilingViolation:
    ceiling: str
    required: str
    actual: str
    detail: str

    def to_dict(self) -> dict[str, str]:
        return {
            "ceiling": self.ceiling,
            "required": self.required,
            "actual": self.actual,
            "detail": self.detail,
        }


def _at_least(order: tuple, actual, required) -> bool:
    return order.index(actual) >= order.index(required)


def check_ceilings(
    delta: StateDelta,
    profile: BoundaryProfile,
    domain_table: tuple[tuple[str, PersistenceDomain], ...] = DEFAULT_DOMAIN_TABLE,
) -> tuple[CeilingViolation, ...]:
    """Which parts of this delta exceed what the profile permits."""
    violations: list[CeilingViolation] = []

    def need_persistence(required: PersistenceCeiling, detail: str) -> None:
        if not _at_least(PERSISTENCE_ORDER, profile.persistence_ceiling, required):
            violations.append(
                CeilingViolation(
                    ceiling="persistence_ceiling",
                    required=required.value,
                    actual=profile.persistence_ceiling.value,
                    detail=detail,
                )
            )

    def need_exposure(required: ExposureCeiling, detail: str) -> None:
        if not _at_least(EXPOSURE_ORDER, profile.exposure_ceiling, required):
            violations.append(
                CeilingViolation(
                    ceiling="exposure_ceiling",
                    required=required.value,
                    actual=profile.exposure_ceiling.value,
                    detail=detail,
                )
            )

    for path in (*delta.created, *delta.modified, *delta.deleted):
        domain = domain_of(path, domain_table)
        if domain is PersistenceDomain.WORKSPACE:
            need_persistence(PersistenceCeiling.WORKSPACE, f"file change in workspace: {path}")
        elif domain in (PersistenceDomain.USER_PROFILE, PersistenceDomain.SYSTEM):
            need_persistence(PersistenceCeiling.SYSTEM, f"file change outlives the workspace: {path}")

    for address, port, interface_class in delta.new_binds:
        if interface_class == InterfaceClass.LOOPBACK.value:
            continue
        if interface_class == InterfaceClass.PRIVATE.value:
            need_exposure(ExposureCeiling.PRIVATE_NET, f"listener on {address}:{port}")
        else:
            need_exposure(ExposureCeiling.PUBLIC, f"listener on {address}:{port}")

    for port in delta.new_firewall_opens:
        need_exposure(ExposureCeiling.PUBLIC, f"firewall opened for port {port}")

    for name, system_wide in delta.new_packages:
        if system_wide:
            need_persistence(PersistenceCeiling.SYSTEM, f"system-wide package: {name}")
        else:
            need_persistence(PersistenceCeiling.WORKSPACE, f"project-local package: {name}")

    for service, field_name, old, new in delta.service_transitions:
        if field_name == "enabled" and old != new:
            need_persistence(PersistenceCeiling.SYSTEM, f"boot-state change for {service}")

    if delta.sudo_used and not _at_least(
        PRIVILEGE_ORDER, profile.privilege_ceiling, PrivilegeCeiling.ELEVATED_WITH_CONFIRM
    ):
        violations.append(
            CeilingViolation(
                ceiling="privilege_ceiling",
                required=PrivilegeCeiling.ELEVATED_WITH_CONFIRM.value,
                actual=profile.privilege_ceiling.value,
                detail="step ran with superuser privileges",
            )
        )

    return tuple(violations)
