"""Shell command lines -> typed host actions.

Covers a POSIX-flavored subset: quote-aware splitting on ``;``, ``&&``, ``||``
and ``|``, no variable expansion, no substitution. Anything outside the
recognized subset degrades to an Unknown action so downstream stages stay
fail-closed rather than silently optimistic.
"""

from __future__ import annotations

import ipaddress
import json
import posixpath
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterable

MAX_INPUT_BYTES = 64 * 1024

DEFAULT_CWD = "/work"
DEFAULT_HOME = "/home/user"


class InputTooLargeError(ValueError):
    pass


class RuleLoadError(ValueError):
    pass


class ActionKind(str, Enum):
    EXEC = "EXEC"
    FILE_WRITE = "FILE_WRITE"
    FILE_READ = "FILE_READ"
    FILE_DELETE = "FILE_DELETE"
    NET_BIND = "NET_BIND"
    FIREWALL_CHANGE = "FIREWALL_CHANGE"
    PACKAGE_INSTALL = "PACKAGE_INSTALL"
    SERVICE_CONTROL = "SERVICE_CONTROL"
    CONFIG_EDIT = "CONFIG_EDIT"
    DOWNLOAD = "DOWNLOAD"
    UNKNOWN = "UNKNOWN"


class InterfaceClass(str, Enum):
    LOOPBACK = "LOOPBACK"
    PRIVATE = "PRIVATE"
    PUBLIC = "PUBLIC"
    WILDCARD = "WILDCARD"


class FirewallDirection(str, Enum):
    OPEN = "OPEN"
    CLOSE = "CLOSE"


class ServiceOp(str, Enum):
    START = "START"
    STOP = "STOP"
    RESTART = "RESTART"
    FORCE_RESTART = "FORCE_RESTART"
    ENABLE = "ENABLE"
    DISABLE = "DISABLE"


class PersistenceDomain(str, Enum):
    EPHEMERAL = "EPHEMERAL"
    WORKSPACE = "WORKSPACE"
    USER_PROFILE = "USER_PROFILE"
    SYSTEM = "SYSTEM"


@dataclass(frozen=True, kw_only=True)
class ExecAction:
    kind = ActionKind.EXEC
    program: str
    argv: tuple[str, ...] = ()
    piped_to_shell: bool = False
    perm_widening: tuple[str, ...] = ()
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class FileWriteAction:
    kind = ActionKind.FILE_WRITE
    path: str
    recursive: bool = False
    force: bool = False
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class FileReadAction:
    kind = ActionKind.FILE_READ
    path: str
    recursive: bool = False
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class FileDeleteAction:
    kind = ActionKind.FILE_DELETE
    path: str
    recursive: bool = False
    force: bool = False
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class NetBindAction:
    kind = ActionKind.NET_BIND
    address: str
    port: int = 0
    interface_class: InterfaceClass = InterfaceClass.PUBLIC
    tunnel: bool = False
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class FirewallAction:
    kind = ActionKind.FIREWALL_CHANGE
    direction: FirewallDirection
    target_port: int | None = None
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class PackageInstallAction:
    kind = ActionKind.PACKAGE_INSTALL
    manager: str
    packages: tuple[str, ...] = ()
    system_wide: bool = False
    added_repository: str | None = None
    registry: str = ""
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class ServiceControlAction:
    kind = ActionKind.SERVICE_CONTROL
    service: str
    op: ServiceOp
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class ConfigEditAction:
    kind = ActionKind.CONFIG_EDIT
    path: str
    persistence_domain: PersistenceDomain
    force: bool = False
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class DownloadAction:
    kind = ActionKind.DOWNLOAD
    url: str
    executed_inline: bool = False
    target_path: str | None = None
    sudo: bool = False
    source: str = ""


@dataclass(frozen=True, kw_only=True)
class UnknownAction:
    kind = ActionKind.UNKNOWN
    raw: str
    sudo: bool = False
    source: str = ""


ActionIR = (
    ExecAction
    | FileWriteAction
    | FileReadAction
    | FileDeleteAction
    | NetBindAction
    | FirewallAction
    | PackageInstallAction
    | ServiceControlAction
    | ConfigEditAction
    | DownloadAction
    | UnknownAction
)


def action_to_dict(action: ActionIR) -> dict[str, Any]:
    out: dict[str, Any] = {"kind": action.kind.value}
    for name in action.__dataclass_fields__:
        value = getattr(action, name)
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[name] = value
    return out


@dataclass(frozen=True)
class Diagnostic:
    span: tuple[int, int]
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {"span": list(self.span), "message": self.message}


@dataclass(frozen=True)
class ParseReport:
    actions: tuple[ActionIR, ...]
    diagnostics: tuple[Diagnostic, ...]


class ScopeResult(str, Enum):
    IN_SCOPE = "IN_SCOPE"
    OUT_OF_SCOPE = "OUT_OF_SCOPE"
    NO_PATH_INVOLVED = "NO_PATH_INVOLVED"


def action_paths(action: ActionIR) -> tuple[str, ...]:
    if isinstance(action, (FileWriteAction, FileReadAction, FileDeleteAction, ConfigEditAction)):
        return (action.path,)
    if isinstance(action, DownloadAction) and action.target_path:
        return (action.target_path,)
    return ()


def scope_check(action: ActionIR, scope_paths: Iterable[str]) -> ScopeResult:
    paths = action_paths(action)
    if not paths:
        return ScopeResult.NO_PATH_INVOLVED
    prefixes = tuple(scope_paths)
    for path in paths:
        contained = any(
            prefix == "/" or path == prefix or path.startswith(prefix + "/") for prefix in prefixes
        )
        if not contained:
            return ScopeResult.OUT_OF_SCOPE
    return ScopeResult.IN_SCOPE


# --- tokenizing ---------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    text: str
    quoted: bool


class _UnbalancedQuote(Exception):
    pass


def _split_raw(raw: str) -> list[list[tuple[str, int, int]]]:
    """Split into pipelines of simple-command segments; quotes protect connectors."""
    pipelines: list[list[tuple[str, int, int]]] = []
    current: list[tuple[str, int, int]] = []
    start = 0
    i = 0
    quote: str | None = None
    n = len(raw)

    def cut(end: int) -> None:
        current.append((raw[start:end], start, end))

    while i < n:
        ch = raw[i]
        if quote is not None:
            if quote == '"' and ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
            i += 1
            continue
        if ch == "\\":
            i += 2
            continue
        if ch in "'\"":
            quote = ch
            i += 1
            continue
        if ch == ";":
            cut(i)
            pipelines.append(current)
            current = []
            start = i + 1
            i += 1
            continue
        if ch == "&" and i + 1 < n and raw[i + 1] == "&":
            cut(i)
            pipelines.append(current)
            current = []
            start = i + 2
            i += 2
            continue
        if ch == "|":
            if i + 1 < n and raw[i + 1] == "|":
                cut(i)
                pipelines.append(current)
                current = []
                start = i + 2
                i += 2
                continue
            cut(i)
            start = i + 1
            i += 1
            continue
        i += 1
    if quote is not None:
        raise _UnbalancedQuote()
    cut(n)
    pipelines.append(current)
    return pipelines


def _tokenize(segment: str) -> list[_Token]:
    tokens: list[_Token] = []
    buf: list[str] = []
    quoted = False
    pending = False
    quote: str | None = None
    i = 0
    n = len(segment)
    while i < n:
        ch = segment[i]
        if quote is not None:
            if quote == '"' and ch == "\\" and i + 1 < n:
                buf.append(segment[i + 1])
                i += 2
                continue
            if ch == quote:
                quote = None
                i += 1
                continue
            buf.append(ch)
            i += 1
            continue
        if ch == "\\" and i + 1 < n:
            buf.append(segment[i + 1])
            pending = True
            i += 2
            continue
        if ch in "'\"":
            quote = ch
            quoted = True
            pending = True
            i += 1
            continue
        if ch.isspace():
            if pending or buf:
                tokens.append(_Token("".join(buf), quoted))
                buf, quoted, pending = [], False, False
            i += 1
            continue
        buf.append(ch)
        pending = True
        i += 1
    if pending or buf:
        tokens.append(_Token("".join(buf), quoted))
    return tokens


# --- path handling ------------------------------------------------------


class _PathUnresolvable(Exception):
    pass


def _resolve_path(token: str, cwd: str, home: str) -> str:
    if "$" in token:
        raise _PathUnresolvable(token)
    path = token
    if path == "~":
        path = home
    elif path.startswith("~/"):
        path = home + path[1:]
    if not path.startswith("/"):
        path = cwd.rstrip("/") + "/" + path
    normalized = posixpath.normpath(path)
    return normalized if normalized.startswith("/") else "/" + normalized


_SYSTEM_WRITE_PREFIXES = ("/etc", "/usr", "/lib")
_USER_PROFILE_FILES = (".bashrc", ".profile", ".zshrc")


def _write_action(
    path: str, *, home: str, force: bool = False, recursive: bool = False, sudo: bool, source: str
) -> FileWriteAction | ConfigEditAction:
    """Writes into system config roots or shell profile files are config edits."""
    if any(path == p or path.startswith(p + "/") for p in _SYSTEM_WRITE_PREFIXES):
        return ConfigEditAction(
            path=path, persistence_domain=PersistenceDomain.SYSTEM, force=force, sudo=sudo, source=source
        )
    parent, name = posixpath.split(path)
    if parent == home.rstrip("/") and name in _USER_PROFILE_FILES:
        return ConfigEditAction(
            path=path,
            persistence_domain=PersistenceDomain.USER_PROFILE,
            force=force,
            sudo=sudo,
            source=source,
        )
    return FileWriteAction(path=path, recursive=recursive, force=force, sudo=sudo, source=source)


def classify_interface(address: str) -> InterfaceClass:
    if address in ("", "*", "0.0.0.0", "::"):
        return InterfaceClass.WILDCARD
    if address == "localhost":
        return InterfaceClass.LOOPBACK
    try:
        ip = ipaddress.ip_address(address)
    except ValueError:
        return InterfaceClass.PUBLIC
    if ip.is_unspecified:
        return InterfaceClass.WILDCARD
    if ip.is_loopback:
        return InterfaceClass.LOOPBACK
    if ip.is_private:
        return InterfaceClass.PRIVATE
    return InterfaceClass.PUBLIC


def _make_bind(address: str, port: int, *, tunnel: bool = False, sudo: bool, source: str) -> NetBindAction:
    cls = classify_interface(address)
    if cls is InterfaceClass.WILDCARD and address not in ("0.0.0.0", "::"):
        address = "0.0.0.0"
    return NetBindAction(
        address=address, port=port, interface_class=cls, tunnel=tunnel, sudo=sudo, source=source
    )


# --- per-command context ------------------------------------------------


@dataclass
class _Cmd:
    program: str
    program_token: str
    args: list[_Token]
    sudo: bool
    source: str
    cwd: str
    home: str

    def arg_texts(self) -> list[str]:
        return [t.text for t in self.args]

    def resolve(self, token: str) -> str:
        return _resolve_path(token, self.cwd, self.home)


def _split_flags(args: list[_Token]) -> tuple[list[str], list[str]]:
    """(flags, positionals); '--' ends flag parsing; quoted tokens are positional."""
    flags: list[str] = []
    positionals: list[str] = []
    flags_done = False
    for t in args:
        if not flags_done and not t.quoted and t.text == "--":
            flags_done = True
            continue
        if not flags_done and not t.quoted and t.text.startswith("-") and len(t.text) > 1:
            flags.append(t.text)
        else:
            positionals.append(t.text)
    return flags, positionals


def _strip_value_flags(args: list[_Token], value_flags: set[str]) -> list[_Token]:
    out: list[_Token] = []
    skip = False
    for t in args:
        if skip:
            skip = False
            continue
        if not t.quoted and t.text in value_flags:
            skip = True
            continue
        out.append(t)
    return out


def _port_from(text: str) -> int | None:
    if text.isdigit():
        value = int(text)
        if 0 < value <= 65535:
            return value
    return None


# --- handlers -----------------------------------------------------------

_Handler = Callable[[_Cmd], "list[ActionIR] | None"]

_PKG_REGISTRY = {
    "apt": "apt",
    "dnf": "dnf",
    "yum": "yum",
    "pacman": "pacman",
    "pip": "pypi",
    "npm": "npmjs",
    "cargo": "crates-io",
}


def _pkg_action(
    cmd: _Cmd,
    manager: str,
    packages: list[str],
    *,
    system_wide: bool,
    added_repository: str | None = None,
    registry: str | None = None,
) -> PackageInstallAction:
    return PackageInstallAction(
        manager=manager,
        packages=tuple(packages),
        system_wide=system_wide,
        added_repository=added_repository,
        registry=registry or _PKG_REGISTRY.get(manager, manager),
        sudo=cmd.sudo,
        source=cmd.source,
    )


def _handle_system_pkg(cmd: _Cmd) -> list[ActionIR] | None:
    manager = "apt" if cmd.program in ("apt", "apt-get") else cmd.program
    flags, positionals = _split_flags(cmd.args)
    if cmd.program == "pacman":
        if any(f.startswith("-S") and "y" not in f[1:] or f == "-S" for f in flags):
            return [_pkg_action(cmd, manager, positionals, system_wide=True)]
        return [_exec(cmd)]
    if positionals and positionals[0] == "install":
        return [_pkg_action(cmd, manager, positionals[1:], system_wide=True)]
    return [_exec(cmd)]


def _handle_add_apt_repository(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    repo = positionals[0] if positionals else ""
    return [_pkg_action(cmd, "apt", [], system_wide=True, added_repository=repo)]


_PIP_LOCAL_FLAGS = {"--user", "--target", "--prefix", "--root"}


def _registry_override(args: list[_Token], flag_names: tuple[str, ...]) -> str | None:
    texts = [t.text for t in args]
    for i, text in enumerate(texts):
        for flag in flag_names:
            if text == flag and i + 1 < len(texts):
                return _hostname_of(texts[i + 1])
            if text.startswith(flag + "="):
                return _hostname_of(text.split("=", 1)[1])
    return None


def _hostname_of(value: str) -> str:
    m = re.match(r"[a-z+]+://([^/:]+)", value)
    return m.group(1) if m else value


def _handle_pip(cmd: _Cmd) -> list[ActionIR] | None:
    args = _strip_value_flags(cmd.args, {"-r", "--requirement", "--index-url", "-i", "--target", "--prefix", "--root"})
    flags, positionals = _split_flags(args)
    if not positionals or positionals[0] != "install":
        return [_exec(cmd)]
    all_texts = cmd.arg_texts()
    local = (
        any(f.split("=", 1)[0] in _PIP_LOCAL_FLAGS for f in all_texts)
        or "venv/" in cmd.program_token
        or cmd.program_token.startswith(".venv")
    )
    registry = _registry_override(cmd.args, ("--index-url", "-i"))
    return [
        _pkg_action(cmd, "pip", positionals[1:], system_wide=not local, registry=registry)
    ]


def _handle_npm(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(_strip_value_flags(cmd.args, {"--registry"}))
    if not positionals or positionals[0] not in ("install", "i", "add"):
        return [_exec(cmd)]
    system_wide = any(f in ("-g", "--global") for f in flags)
    registry = _registry_override(cmd.args, ("--registry",))
    return [_pkg_action(cmd, "npm", positionals[1:], system_wide=system_wide, registry=registry)]


def _handle_cargo(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(_strip_value_flags(cmd.args, {"--root", "--registry"}))
    if not positionals or positionals[0] not in ("install", "add"):
        return [_exec(cmd)]
    local = positionals[0] == "add" or any(f.startswith("--root") for f in cmd.arg_texts())
    registry = _registry_override(cmd.args, ("--registry",))
    return [_pkg_action(cmd, "cargo", positionals[1:], system_wide=not local, registry=registry)]


def _handle_rm(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    recursive = any(
        f in ("--recursive",) or (f.startswith("-") and not f.startswith("--") and set(f[1:]) & {"r", "R"})
        for f in flags
    )
    force = any(
        f in ("--force",) or (f.startswith("-") and not f.startswith("--") and "f" in f[1:])
        for f in flags
    )
    if not positionals:
        return [_exec(cmd)]
    return [
        FileDeleteAction(
            path=cmd.resolve(p), recursive=recursive, force=force, sudo=cmd.sudo, source=cmd.source
        )
        for p in positionals
    ]


_WIDE_MODE = re.compile(r"^([0-7])?77[0-7]?$|(\ba|o|ugo|go)\+w|=(.*w.*,)*o.*w")


def _handle_chmod(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    widening: list[str] = []
    mode = positionals[0] if positionals else ""
    if cmd.program == "chmod" and (_WIDE_MODE.search(mode) or mode in ("777", "a+rwx")):
        widening.append(mode)
    if any(f in ("-R", "--recursive") for f in flags):
        widening.append("-R")
    return [
        ExecAction(
            program=cmd.program,
            argv=tuple(cmd.arg_texts()),
            perm_widening=tuple(widening),
            sudo=cmd.sudo,
            source=cmd.source,
        )
    ]


def _handle_ufw(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    if not positionals:
        return [_exec(cmd)]
    verb = positionals[0]
    port = None
    for p in positionals[1:]:
        port = _port_from(p.split("/", 1)[0])
        if port:
            break
    if verb == "allow":
        return [FirewallAction(direction=FirewallDirection.OPEN, target_port=port, sudo=cmd.sudo, source=cmd.source)]
    if verb in ("deny", "delete", "reject"):
        return [FirewallAction(direction=FirewallDirection.CLOSE, target_port=port, sudo=cmd.sudo, source=cmd.source)]
    return [_exec(cmd)]


def _handle_iptables(cmd: _Cmd) -> list[ActionIR] | None:
    texts = cmd.arg_texts()
    port = None
    for i, t in enumerate(texts):
        if t in ("--dport", "--sport") and i + 1 < len(texts):
            port = _port_from(texts[i + 1])
    accept = any(texts[i] == "-j" and texts[i + 1] == "ACCEPT" for i in range(len(texts) - 1))
    if "-A" in texts or "-I" in texts:
        direction = FirewallDirection.OPEN if accept else FirewallDirection.CLOSE
        return [FirewallAction(direction=direction, target_port=port, sudo=cmd.sudo, source=cmd.source)]
    if "-D" in texts:
        return [FirewallAction(direction=FirewallDirection.CLOSE, target_port=port, sudo=cmd.sudo, source=cmd.source)]
    return [_exec(cmd)]


def _handle_firewall_cmd(cmd: _Cmd) -> list[ActionIR] | None:
    for text in cmd.arg_texts():
        if text.startswith("--add-port"):
            port = _port_from(text.split("=", 1)[-1].split("/", 1)[0])
            return [FirewallAction(direction=FirewallDirection.OPEN, target_port=port, sudo=cmd.sudo, source=cmd.source)]
        if text.startswith("--remove-port"):
            port = _port_from(text.split("=", 1)[-1].split("/", 1)[0])
            return [FirewallAction(direction=FirewallDirection.CLOSE, target_port=port, sudo=cmd.sudo, source=cmd.source)]
    return [_exec(cmd)]


_SERVICE_VERBS = {
    "start": ServiceOp.START,
    "stop": ServiceOp.STOP,
    "restart": ServiceOp.RESTART,
    "try-restart": ServiceOp.RESTART,
    "reload-or-restart": ServiceOp.RESTART,
    "enable": ServiceOp.ENABLE,
    "disable": ServiceOp.DISABLE,
}


def _handle_systemctl(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    if not positionals:
        return [_exec(cmd)]
    verb = positionals[0]
    if verb == "kill":
        return [
            ServiceControlAction(service=s, op=ServiceOp.FORCE_RESTART, sudo=cmd.sudo, source=cmd.source)
            for s in positionals[1:]
        ] or [_exec(cmd)]
    op = _SERVICE_VERBS.get(verb)
    if op is None:
        # status/show/list-units and friends are reads
        return [_exec(cmd)]
    if op is ServiceOp.RESTART and any(f in ("-f", "--force") for f in flags):
        op = ServiceOp.FORCE_RESTART
    services = [_strip_unit_suffix(s) for s in positionals[1:]]
    if not services:
        return [_exec(cmd)]
    return [
        ServiceControlAction(service=s, op=op, sudo=cmd.sudo, source=cmd.source) for s in services
    ]


def _strip_unit_suffix(name: str) -> str:
    return name[: -len(".service")] if name.endswith(".service") else name


def _handle_service(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    if len(positionals) >= 2 and positionals[1] in _SERVICE_VERBS:
        op = _SERVICE_VERBS[positionals[1]]
        return [ServiceControlAction(service=positionals[0], op=op, sudo=cmd.sudo, source=cmd.source)]
    return [_exec(cmd)]


def _has_kill_9(flags: list[str]) -> bool:
    return any(f in ("-9", "-KILL", "-SIGKILL") for f in flags)


def _handle_kill(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(_strip_value_flags(cmd.args, {"-s", "--signal"}))
    texts = cmd.arg_texts()
    forced = _has_kill_9(flags) or any(
        texts[i] in ("-s", "--signal") and texts[i + 1] in ("9", "KILL", "SIGKILL")
        for i in range(len(texts) - 1)
    )
    if not forced or not positionals:
        return [_exec(cmd)]
    target = positionals[-1]
    name = target if cmd.program != "kill" else f"pid:{target}"
    return [ServiceControlAction(service=name, op=ServiceOp.FORCE_RESTART, sudo=cmd.sudo, source=cmd.source)]


def _handle_cp(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    if len(positionals) < 2:
        return [_exec(cmd)]
    force = any(f in ("-f", "--force") or (f.startswith("-") and not f.startswith("--") and "f" in f[1:]) for f in flags)
    recursive = any(set(f[1:]) & {"r", "R", "a"} for f in flags if not f.startswith("--"))
    dest = cmd.resolve(positionals[-1])
    actions: list[ActionIR] = [
        FileReadAction(path=cmd.resolve(p), recursive=recursive, sudo=cmd.sudo, source=cmd.source)
        for p in positionals[:-1]
    ]
    actions.append(
        _write_action(dest, home=cmd.home, force=force, recursive=recursive, sudo=cmd.sudo, source=cmd.source)
    )
    return actions


def _handle_mv(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    if len(positionals) < 2:
        return [_exec(cmd)]
    force = any(f in ("-f", "--force") for f in flags)
    dest = cmd.resolve(positionals[-1])
    actions: list[ActionIR] = [
        FileDeleteAction(path=cmd.resolve(p), sudo=cmd.sudo, source=cmd.source)
        for p in positionals[:-1]
    ]
    actions.append(_write_action(dest, home=cmd.home, force=force, sudo=cmd.sudo, source=cmd.source))
    return actions


def _handle_ln(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    if len(positionals) < 2:
        return [_exec(cmd)]
    force = any(f in ("-f", "--force") or (f.startswith("-") and not f.startswith("--") and "f" in f[1:]) for f in flags)
    dest = cmd.resolve(positionals[-1])
    return [_write_action(dest, home=cmd.home, force=force, sudo=cmd.sudo, source=cmd.source)]


def _handle_touch(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    if not positionals:
        return [_exec(cmd)]
    return [
        _write_action(cmd.resolve(p), home=cmd.home, sudo=cmd.sudo, source=cmd.source)
        for p in positionals
    ]


def _handle_tee(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    return [
        _write_action(cmd.resolve(p), home=cmd.home, sudo=cmd.sudo, source=cmd.source)
        for p in positionals
    ] or [_exec(cmd)]


def _handle_sed(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(_strip_value_flags(cmd.args, {"-e", "--expression"}))
    in_place = any(f == "-i" or f.startswith("-i") or f == "--in-place" for f in flags)
    files = positionals[1:] if len(positionals) > 1 else []
    if not files:
        return [_exec(cmd)]
    if in_place:
        return [
            _write_action(cmd.resolve(p), home=cmd.home, sudo=cmd.sudo, source=cmd.source)
            for p in files
        ]
    return [FileReadAction(path=cmd.resolve(p), sudo=cmd.sudo, source=cmd.source) for p in files]


def _handle_read_files(cmd: _Cmd) -> list[ActionIR] | None:
    args = _strip_value_flags(cmd.args, {"-n", "-c", "--lines", "--bytes"})
    _, positionals = _split_flags(args)
    if not positionals:
        return [_exec(cmd)]
    return [FileReadAction(path=cmd.resolve(p), sudo=cmd.sudo, source=cmd.source) for p in positionals]


def _handle_grep(cmd: _Cmd) -> list[ActionIR] | None:
    args = _strip_value_flags(cmd.args, {"-e", "-f", "-m", "-A", "-B", "-C", "--include", "--exclude"})
    flags, positionals = _split_flags(args)
    recursive = any(f in ("-r", "-R", "--recursive") or (not f.startswith("--") and set(f[1:]) & {"r", "R"}) for f in flags)
    files = positionals[1:]
    if not files:
        return [_exec(cmd)]
    return [
        FileReadAction(path=cmd.resolve(p), recursive=recursive, sudo=cmd.sudo, source=cmd.source)
        for p in files
    ]


def _handle_find(cmd: _Cmd) -> list[ActionIR] | None:
    texts = cmd.arg_texts()
    if "-exec" in texts or "-execdir" in texts or "-ok" in texts:
        return None  # arbitrary subcommand: degrade to Unknown
    root = None
    for t in cmd.args:
        if t.quoted or not t.text.startswith("-"):
            root = t.text
            break
    if root is None:
        root = "."
    path = cmd.resolve(root)
    actions: list[ActionIR] = [
        FileReadAction(path=path, recursive=True, sudo=cmd.sudo, source=cmd.source)
    ]
    if "-delete" in texts:
        actions.append(
            FileDeleteAction(path=path, recursive=True, force=True, sudo=cmd.sudo, source=cmd.source)
        )
    return actions


def _handle_ls(cmd: _Cmd) -> list[ActionIR] | None:
    flags, positionals = _split_flags(cmd.args)
    recursive = any(f in ("-R", "--recursive") or (not f.startswith("--") and "R" in f[1:]) for f in flags)
    if not positionals:
        return [_exec(cmd)]
    return [
        FileReadAction(path=cmd.resolve(p), recursive=recursive, sudo=cmd.sudo, source=cmd.source)
        for p in positionals
    ]


def _handle_mkdir(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    return [
        _write_action(cmd.resolve(p), home=cmd.home, sudo=cmd.sudo, source=cmd.source)
        for p in positionals
    ] or [_exec(cmd)]


_URL_RE = re.compile(r"^(https?|ftp)://", re.IGNORECASE)


def _handle_curl(cmd: _Cmd) -> list[ActionIR] | None:
    args = _strip_value_flags(
        cmd.args, {"-H", "--header", "-d", "--data", "-X", "--request", "-u", "--user", "-w"}
    )
    url = None
    target = None
    texts = [t.text for t in args]
    i = 0
    while i < len(texts):
        t = texts[i]
        if t in ("-o", "--output") and i + 1 < len(texts):
            target = texts[i + 1]
            i += 2
            continue
        if _URL_RE.match(t) and url is None:
            url = t
        i += 1
    if url is None:
        return [_exec(cmd)]
    if target is None and any(t == "-O" or (t.startswith("-") and not t.startswith("--") and "O" in t[1:]) for t in texts):
        target = posixpath.basename(url.split("?", 1)[0]) or "download"
    resolved = cmd.resolve(target) if target else None
    return [DownloadAction(url=url, target_path=resolved, sudo=cmd.sudo, source=cmd.source)]


def _handle_wget(cmd: _Cmd) -> list[ActionIR] | None:
    texts = cmd.arg_texts()
    url = next((t for t in texts if _URL_RE.match(t)), None)
    if url is None:
        return [_exec(cmd)]
    target = None
    for i, t in enumerate(texts):
        if t == "-O" and i + 1 < len(texts):
            target = texts[i + 1]
        elif t.startswith("--output-document="):
            target = t.split("=", 1)[1]
    if target is None:
        target = posixpath.basename(url.split("?", 1)[0]) or "index.html"
    if target == "-":
        resolved = None
    else:
        resolved = cmd.resolve(target)
    return [DownloadAction(url=url, target_path=resolved, sudo=cmd.sudo, source=cmd.source)]


def _handle_tunnel(cmd: _Cmd) -> list[ActionIR] | None:
    port = 0
    for t in cmd.arg_texts():
        direct = _port_from(t)
        if direct:
            port = direct
            break
        m = re.search(r":(\d{2,5})$", t)
        if m and _port_from(m.group(1)):
            port = int(m.group(1))
            break
    bind = NetBindAction(
        address=cmd.program,
        port=port,
        interface_class=InterfaceClass.PUBLIC,
        tunnel=True,
        sudo=cmd.sudo,
        source=cmd.source,
    )
    return [_exec(cmd), bind]


def _handle_docker(cmd: _Cmd) -> list[ActionIR] | None:
    _, positionals = _split_flags(cmd.args)
    actions: list[ActionIR] = [_exec(cmd)]
    if positionals and positionals[0] in ("run", "create"):
        texts = cmd.arg_texts()
        for i, t in enumerate(texts):
            value = None
            if t in ("-p", "--publish") and i + 1 < len(texts):
                value = texts[i + 1]
            elif t.startswith("--publish="):
                value = t.split("=", 1)[1]
            if value is None:
                continue
            parts = value.split(":")
            if len(parts) == 3:
                address, host_port = parts[0], parts[1]
            elif len(parts) == 2:
                address, host_port = "0.0.0.0", parts[0]
            else:
                continue
            port = _port_from(host_port)
            if port:
                actions.append(_make_bind(address, port, sudo=cmd.sudo, source=cmd.source))
    return actions


def _exec(cmd: _Cmd) -> ExecAction:
    return ExecAction(
        program=cmd.program, argv=tuple(cmd.arg_texts()), sudo=cmd.sudo, source=cmd.source
    )


_HANDLERS: dict[str, _Handler] = {
    "apt": _handle_system_pkg,
    "apt-get": _handle_system_pkg,
    "dnf": _handle_system_pkg,
    "yum": _handle_system_pkg,
    "pacman": _handle_system_pkg,
    "add-apt-repository": _handle_add_apt_repository,
    "pip": _handle_pip,
    "pip3": _handle_pip,
    "npm": _handle_npm,
    "cargo": _handle_cargo,
    "rm": _handle_rm,
    "chmod": _handle_chmod,
    "chown": _handle_chmod,
    "ufw": _handle_ufw,
    "iptables": _handle_iptables,
    "firewall-cmd": _handle_firewall_cmd,
    "systemctl": _handle_systemctl,
    "service": _handle_service,
    "kill": _handle_kill,
    "pkill": _handle_kill,
    "killall": _handle_kill,
    "cp": _handle_cp,
    "mv": _handle_mv,
    "ln": _handle_ln,
    "touch": _handle_touch,
    "tee": _handle_tee,
    "sed": _handle_sed,
    "cat": _handle_read_files,
    "head": _handle_read_files,
    "tail": _handle_read_files,
    "less": _handle_read_files,
    "more": _handle_read_files,
    "grep": _handle_grep,
    "find": _handle_find,
    "ls": _handle_ls,
    "mkdir": _handle_mkdir,
    "curl": _handle_curl,
    "wget": _handle_wget,
    "ngrok": _handle_tunnel,
    "cloudflared": _handle_tunnel,
    "docker": _handle_docker,
}

# Programs with no special handler that still parse to a plain Exec. Anything
# not listed here or in _HANDLERS degrades to Unknown.
KNOWN_PROGRAMS = frozenset(
    {
        "pwd", "echo", "printf", "true", "false", "sleep", "env", "date", "whoami",
        "id", "uname", "hostname", "which", "git", "make", "cmake", "gcc", "g++",
        "cc", "go", "rustc", "python", "python3", "node", "npx", "ruby", "perl",
        "bash", "sh", "zsh", "dash", "ssh", "rsync", "scp", "tar", "gzip", "gunzip",
        "zip", "unzip", "diff", "patch", "sort", "uniq", "wc", "tr", "cut", "awk",
        "ps", "top", "df", "du", "free", "uptime", "stat", "file", "test",
        "journalctl", "pytest", "setenforce", "nginx", "gunicorn", "uvicorn",
        "flask", "jupyter", "code-server", "redis-server",
    }
)

_INTERPRETERS = frozenset(
    {"sh", "bash", "zsh", "dash", "ksh", "python", "python3", "perl", "ruby", "node"}
)

_BIND_FLAGS = ("--bind", "--bind-addr", "--bind-address", "--host", "--ip", "--listen", "-b")
_PORT_FLAGS = ("--port", "-p", "--server-port")
_NO_BIND_SCAN = frozenset({"echo", "printf", "ssh", "scp", "git", "rsync", "awk"})


def _scan_bind(cmd: _Cmd) -> NetBindAction | None:
    address = None
    texts = cmd.arg_texts()
    for i, t in enumerate(cmd.args):
        if t.quoted:
            continue
        text = t.text
        if text in _BIND_FLAGS and i + 1 < len(texts):
            address = texts[i + 1]
            break
        for flag in _BIND_FLAGS:
            if text.startswith(flag + "="):
                address = text.split("=", 1)[1]
                break
        if address is None and text.startswith("host=") and not text.startswith("host=="):
            address = text.split("=", 1)[1]
        if address is not None:
            break
    if address is None:
        return None
    address = address.strip("'\"")
    # value must look like an address, not a stray numeric or flag argument
    if not ("." in address or ":" in address or address in ("localhost", "*")):
        return None
    port: int | None = None
    if address.startswith("["):  # [::]:8000
        m = re.match(r"^\[([^\]]*)\](?::(\d+))?$", address)
        if m:
            address = m.group(1)
            port = _port_from(m.group(2) or "")
    elif address.count(":") == 1:
        host, maybe_port = address.split(":")
        parsed = _port_from(maybe_port)
        if parsed:
            address, port = host, parsed
    if port is None:
        for i, text in enumerate(texts):
            if text in _PORT_FLAGS and i + 1 < len(texts):
                port = _port_from(texts[i + 1])
            else:
                for flag in _PORT_FLAGS:
                    if text.startswith(flag + "="):
                        port = _port_from(text.split("=", 1)[1])
            if port:
                break
    if port is None:
        for text in texts:
            parsed = _port_from(text)
            if parsed:
                port = parsed
                break
    return _make_bind(address, port or 0, sudo=cmd.sudo, source=cmd.source)


# --- custom rules -------------------------------------------------------


@dataclass(frozen=True)
class CustomRule:
    pattern: re.Pattern
    kind: ActionKind
    payload: dict[str, Any]


_KIND_TO_TYPE: dict[ActionKind, type] = {
    ActionKind.EXEC: ExecAction,
    ActionKind.FILE_WRITE: FileWriteAction,
    ActionKind.FILE_READ: FileReadAction,
    ActionKind.FILE_DELETE: FileDeleteAction,
    ActionKind.NET_BIND: NetBindAction,
    ActionKind.FIREWALL_CHANGE: FirewallAction,
    ActionKind.PACKAGE_INSTALL: PackageInstallAction,
    ActionKind.SERVICE_CONTROL: ServiceControlAction,
    ActionKind.CONFIG_EDIT: ConfigEditAction,
    ActionKind.DOWNLOAD: DownloadAction,
    ActionKind.UNKNOWN: UnknownAction,
}

_ENUM_PAYLOAD_FIELDS: dict[str, type] = {
    "interface_class": InterfaceClass,
    "direction": FirewallDirection,
    "op": ServiceOp,
    "persistence_domain": PersistenceDomain,
}


def load_rules(document: Any) -> tuple[CustomRule, ...]:
    """Validate a custom recognizer table; raises RuleLoadError on any defect."""
    if not isinstance(document, list):
        raise RuleLoadError("rules file must be a JSON array")
    rules: list[CustomRule] = []
    for i, entry in enumerate(document):
        if not isinstance(entry, dict) or set(entry) - {"pattern", "kind", "payload_template"}:
            raise RuleLoadError(f"rule {i}: expected pattern/kind/payload_template")
        try:
            pattern = re.compile(entry["pattern"])
        except (re.error, TypeError, KeyError) as exc:
            raise RuleLoadError(f"rule {i}: bad pattern: {exc}") from exc
        try:
            kind = ActionKind(entry["kind"])
        except (ValueError, KeyError) as exc:
            raise RuleLoadError(f"rule {i}: bad kind: {entry.get('kind')!r}") from exc
        payload = entry.get("payload_template", {})
        if not isinstance(payload, dict):
            raise RuleLoadError(f"rule {i}: payload_template must be an object")
        action_type = _KIND_TO_TYPE[kind]
        valid = set(action_type.__dataclass_fields__)
        unknown = set(payload) - valid
        if unknown:
            raise RuleLoadError(f"rule {i}: unknown payload fields {sorted(unknown)}")
        rules.append(CustomRule(pattern=pattern, kind=kind, payload=payload))
    return tuple(rules)


def load_rules_file(path: str) -> tuple[CustomRule, ...]:
    try:
        with open(path, encoding="utf-8") as fh:
            return load_rules(json.load(fh))
    except OSError as exc:
        raise RuleLoadError(f"cannot read rules file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RuleLoadError(f"rules file is not valid JSON: {exc}") from exc


def _apply_custom(rule: CustomRule, match: re.Match, cmd: _Cmd) -> ActionIR:
    kwargs: dict[str, Any] = {}
    for name, value in rule.payload.items():
        if isinstance(value, str):
            value = match.expand(value)
            if name in _ENUM_PAYLOAD_FIELDS:
                value = _ENUM_PAYLOAD_FIELDS[name](value)
            elif name in ("path", "target_path"):
                value = cmd.resolve(value)
        if name in ("argv", "packages", "perm_widening") and isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    kwargs.setdefault("sudo", cmd.sudo)
    kwargs["source"] = cmd.source
    return _KIND_TO_TYPE[rule.kind](**kwargs)


# --- main entry ---------------------------------------------------------

_SUDO_VALUE_OPTS = {"-u", "--user", "-g", "--group"}
_SUDO_BOOL_OPTS = {"-E", "-H", "-n", "-i", "-k", "-b", "-S"}


def parse_command(
    raw: str,
    cwd: str = DEFAULT_CWD,
    *,
    home: str = DEFAULT_HOME,
    rules: tuple[CustomRule, ...] = (),
) -> ParseReport:
    """Parse one raw command line into host actions plus diagnostics."""
    if len(raw.encode("utf-8")) > MAX_INPUT_BYTES:
        raise InputTooLargeError(f"input exceeds {MAX_INPUT_BYTES} bytes")
    if not raw.strip():
        return ParseReport((), ())
    try:
        pipelines = _split_raw(raw)
    except _UnbalancedQuote:
        diag = Diagnostic(span=(0, len(raw)), message="unbalanced quote; treated as opaque")
        return ParseReport((UnknownAction(raw=raw, source=raw),), (diag,))

    actions: list[ActionIR] = []
    diagnostics: list[Diagnostic] = []
    for pipeline in pipelines:
        per_segment: list[list[ActionIR]] = []
        segments = [(seg.strip(), start, end) for seg, start, end in pipeline if seg.strip()]
        for seg, start, end in segments:
            segment_actions, segment_diags = _parse_simple(seg, (start, end), cwd, home, rules)
            per_segment.append(segment_actions)
            diagnostics.extend(segment_diags)
        # pipe-to-interpreter pass: downloads piped into an interpreter run
        # inline and absorb it; other execs just record the piping.
        for i in range(len(per_segment) - 1):
            nxt = per_segment[i + 1]
            interp = (
                len(nxt) == 1
                and isinstance(nxt[0], ExecAction)
                and nxt[0].program in _INTERPRETERS
            )
            if not interp:
                continue
            absorbed = False
            updated: list[ActionIR] = []
            interp_sudo = nxt[0].sudo
            for action in per_segment[i]:
                if isinstance(action, DownloadAction):
                    # the script runs under the interpreter's privilege
                    updated.append(
                        replace(
                            action,
                            executed_inline=True,
                            target_path=None,
                            sudo=action.sudo or interp_sudo,
                        )
                    )
                    absorbed = True
                elif isinstance(action, ExecAction):
                    updated.append(replace(action, piped_to_shell=True))
                else:
                    updated.append(action)
            per_segment[i] = updated
            if absorbed:
                per_segment[i + 1] = []
        for segment_actions in per_segment:
            actions.extend(segment_actions)

    if not actions and raw.strip():
        diagnostics.append(Diagnostic(span=(0, len(raw)), message="no recognizable command"))
        actions.append(UnknownAction(raw=raw, source=raw))
    return ParseReport(tuple(actions), tuple(diagnostics))


def _parse_simple(
    segment: str,
    span: tuple[int, int],
    cwd: str,
    home: str,
    rules: tuple[CustomRule, ...],
) -> tuple[list[ActionIR], list[Diagnostic]]:
    def unknown(message: str) -> tuple[list[ActionIR], list[Diagnostic]]:
        return [UnknownAction(raw=segment, source=segment)], [Diagnostic(span=span, message=message)]

    if "$(" in segment or "`" in segment:
        return unknown("command substitution is not evaluated")

    tokens = _tokenize(segment)
    if not tokens:
        return [], []
    if any(not t.quoted and t.text == "eval" for t in tokens):
        return unknown("eval is not evaluated")

    sudo = False
    if not tokens[0].quoted and tokens[0].text == "sudo":
        sudo = True
        tokens = tokens[1:]
        while tokens and not tokens[0].quoted and tokens[0].text.startswith("-"):
            opt = tokens[0].text
            tokens = tokens[1:]
            if opt in _SUDO_VALUE_OPTS and tokens:
                tokens = tokens[1:]
            elif opt not in _SUDO_BOOL_OPTS and not opt.startswith("--"):
                break
        if not tokens:
            return unknown("sudo without a command")

    extracted = _extract_redirections(tokens)
    if extracted is None:
        return unknown("redirection without a target")
    tokens, write_targets, read_targets = extracted

    if not tokens:
        return unknown("no program named")

    program_token = tokens[0].text
    program = posixpath.basename(program_token) if not tokens[0].quoted else program_token
    cmd = _Cmd(
        program=program,
        program_token=program_token,
        args=tokens[1:],
        sudo=sudo,
        source=segment,
        cwd=cwd,
        home=home,
    )

    cmdline = " ".join(t.text for t in tokens)
    for rule in rules:
        match = rule.pattern.match(cmdline)
        if match:
            try:
                return [_apply_custom(rule, match, cmd)], []
            except (_PathUnresolvable, TypeError, ValueError):
                return unknown("custom rule produced an invalid action")

    try:
        handler = _HANDLERS.get(program)
        if handler is not None:
            built = handler(cmd)
            if built is None:
                return unknown("unsupported form of a recognized program")
            result = built
        elif program in KNOWN_PROGRAMS:
            result = [_exec(cmd)]
        else:
            return unknown(f"unrecognized program: {program}")

        if program not in _NO_BIND_SCAN and any(isinstance(a, ExecAction) for a in result):
            bind = _scan_bind(cmd)
            if bind is not None and not any(isinstance(a, NetBindAction) for a in result):
                result.append(bind)

        for target, _append in write_targets:
            if target.startswith("&"):
                continue
            path = _resolve_path(target, cwd, home)
            if path.startswith("/dev/"):
                continue
            result.append(_write_action(path, home=home, sudo=sudo, source=segment))
        for target in read_targets:
            path = _resolve_path(target, cwd, home)
            result.append(FileReadAction(path=path, sudo=sudo, source=segment))
    except _PathUnresolvable as exc:
        return unknown(f"unresolvable path: {exc.args[0]!r}")

    return result, []


_REDIR_RE = re.compile(r"^(\d*)(>>|>|<)(.*)$")


def _extract_redirections(
    tokens: list[_Token],
) -> tuple[list[_Token], list[tuple[str, bool]], list[str]] | None:
    remaining: list[_Token] = []
    writes: list[tuple[str, bool]] = []
    reads: list[str] = []
    i = 0
    while i < len(tokens):
        t = tokens[i]
        m = None if t.quoted else _REDIR_RE.match(t.text)
        if m and m.group(2):
            target = m.group(3)
            if not target:
                if i + 1 >= len(tokens):
                    return None
                target = tokens[i + 1].text
                i += 2
            else:
                i += 1
            if m.group(2) == "<":
                reads.append(target)
            elif not target.startswith("&"):
                writes.append((target, m.group(2) == ">>"))
            continue
        remaining.append(t)
        i += 1
    return remaining, writes, reads
