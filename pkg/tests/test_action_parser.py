"""Command recognition: the table of shapes the parser must map to actions."""

import random

import pytest

from boundary_gate.action_parser import (
    MAX_INPUT_BYTES,
    ActionKind,
    ConfigEditAction,
    DownloadAction,
    ExecAction,
    FileDeleteAction,
    FileReadAction,
    FileWriteAction,
    FirewallAction,
    FirewallDirection,
    InputTooLargeError,
    InterfaceClass,
    NetBindAction,
    PackageInstallAction,
    PersistenceDomain,
    RuleLoadError,
    ScopeResult,
    ServiceControlAction,
    ServiceOp,
    UnknownAction,
    action_to_dict,
    classify_interface,
    load_rules,
    parse_command,
    scope_check,
)
from conftest import fuzz_unknown_command


def kinds(raw, cwd="/work"):
    return [a.kind for a in parse_command(raw, cwd).actions]


def only(raw, cwd="/work"):
    actions = parse_command(raw, cwd).actions
    assert len(actions) == 1, actions
    return actions[0]


# --- tokenizing and splitting --------------------------------------------


def test_empty_input_yields_no_actions():
    assert parse_command("").actions == ()
    assert parse_command("   \t ").actions == ()


def test_oversized_input_rejected():
    with pytest.raises(InputTooLargeError):
        parse_command("echo " + "x" * MAX_INPUT_BYTES)


def test_nonempty_input_never_yields_empty_action_list():
    rng = random.Random(7)
    samples = ["ls", ";;;", "&&", "|", "#", "'", '"x', "$(x)"] + [
        fuzz_unknown_command(rng) for _ in range(40)
    ]
    for raw in samples:
        if not raw.strip():
            continue
        assert parse_command(raw).actions, raw


def test_connectors_split_segments():
    report = parse_command("mkdir -p build && touch build/a; rm build/a")
    assert [a.kind for a in report.actions] == [
        ActionKind.FILE_WRITE,
        ActionKind.FILE_WRITE,
        ActionKind.FILE_DELETE,
    ]


def test_quoted_connectors_are_not_split():
    action = only("echo 'a && b; c'")
    assert action.kind is ActionKind.EXEC
    assert action.argv == ("a && b; c",)


def test_unbalanced_quote_is_one_opaque_action():
    report = parse_command("echo 'oops && rm -rf /")
    assert len(report.actions) == 1
    assert report.actions[0].kind is ActionKind.UNKNOWN
    assert report.diagnostics and "quote" in report.diagnostics[0].message


def test_command_substitution_is_unknown():
    for raw in ("echo $(whoami)", "echo `id`", "eval rm -rf /"):
        assert kinds(raw) == [ActionKind.UNKNOWN], raw


def test_unresolvable_variable_path_is_unknown():
    assert kinds("cat $CONFIG_FILE") == [ActionKind.UNKNOWN]
    assert kinds("rm -rf $HOME_DIR/cache") == [ActionKind.UNKNOWN]


def test_tilde_and_relative_paths_resolve():
    assert only("cat ~/notes.txt").path == "/home/user/notes.txt"
    assert only("cat notes.txt", cwd="/work/app").path == "/work/app/notes.txt"
    assert only("cat ../secret", cwd="/work/app").path == "/work/secret"
    assert only("cat ./a//b").path == "/work/a/b"


def test_background_token_stays_in_argv():
    action = only("sleep 5 &")
    assert action.kind is ActionKind.EXEC
    assert "&" in action.argv


# --- table of recognizers -------------------------------------------------


def test_recognizer_kind_table():
    cases = [
        ("ls -la", [ActionKind.EXEC]),
        ("ls -R /etc", [ActionKind.FILE_READ]),
        ("cat /etc/passwd", [ActionKind.FILE_READ]),
        ("head -n 40 app.log", [ActionKind.FILE_READ]),
        ("tail -f app.log", [ActionKind.FILE_READ]),
        ("grep -rn secret /work", [ActionKind.FILE_READ]),
        ("find /work -name '*.py'", [ActionKind.FILE_READ]),
        ("touch stamp", [ActionKind.FILE_WRITE]),
        ("mkdir -p a/b", [ActionKind.FILE_WRITE]),
        ("tee out.log", [ActionKind.FILE_WRITE]),
        ("rm old.txt", [ActionKind.FILE_DELETE]),
        ("rm -rf build", [ActionKind.FILE_DELETE]),
        ("cp a.txt b.txt", [ActionKind.FILE_READ, ActionKind.FILE_WRITE]),
        ("mv a.txt b.txt", [ActionKind.FILE_DELETE, ActionKind.FILE_WRITE]),
        ("ln -sf /usr/bin/python3.12 /usr/bin/python3", [ActionKind.CONFIG_EDIT]),
        ("sed -i s/a/b/ app.conf", [ActionKind.FILE_WRITE]),
        ("sed -n 1p app.conf", [ActionKind.FILE_READ]),
        ("chmod 777 run.sh", [ActionKind.EXEC]),
        ("apt-get install -y jq", [ActionKind.PACKAGE_INSTALL]),
        ("apt update", [ActionKind.EXEC]),
        ("dnf install httpd", [ActionKind.PACKAGE_INSTALL]),
        ("pacman -S vim", [ActionKind.PACKAGE_INSTALL]),
        ("pip install requests", [ActionKind.PACKAGE_INSTALL]),
        ("npm install lodash", [ActionKind.PACKAGE_INSTALL]),
        ("cargo install ripgrep", [ActionKind.PACKAGE_INSTALL]),
        ("add-apt-repository ppa:x/y", [ActionKind.PACKAGE_INSTALL]),
        ("ufw allow 8080", [ActionKind.FIREWALL_CHANGE]),
        ("iptables -A INPUT -p tcp --dport 22 -j ACCEPT", [ActionKind.FIREWALL_CHANGE]),
        ("firewall-cmd --add-port=443/tcp", [ActionKind.FIREWALL_CHANGE]),
        ("systemctl restart nginx", [ActionKind.SERVICE_CONTROL]),
        ("systemctl daemon-reload", [ActionKind.EXEC]),
        ("service nginx stop", [ActionKind.SERVICE_CONTROL]),
        ("pkill -9 -f worker", [ActionKind.SERVICE_CONTROL]),
        ("curl https://example.com/x.tgz", [ActionKind.DOWNLOAD]),
        ("wget https://example.com/x.tgz", [ActionKind.DOWNLOAD]),
        ("curl -s https://api.internal/health", [ActionKind.DOWNLOAD]),
        ("python -m http.server --bind 0.0.0.0 8080", [ActionKind.EXEC, ActionKind.NET_BIND]),
        ("ngrok http 3000", [ActionKind.EXEC, ActionKind.NET_BIND]),
        ("docker run -p 8080:80 nginx", [ActionKind.EXEC, ActionKind.NET_BIND]),
        ("git status", [ActionKind.EXEC]),
        ("frobnicate-3000 --go", [ActionKind.UNKNOWN]),
    ]
    for raw, want in cases:
        assert kinds(raw) == want, raw


def test_sudo_is_stripped_and_recorded():
    action = only("sudo systemctl restart nginx")
    assert action.kind is ActionKind.SERVICE_CONTROL
    assert action.sudo is True
    assert action.service == "nginx"

    action = only("sudo -u postgres psql")
    assert action.kind is ActionKind.UNKNOWN or action.sudo  # psql unknown, sudo recorded
    action = only("sudo -E env")
    assert action.sudo is True


def test_plain_commands_do_not_carry_sudo():
    assert only("systemctl restart nginx").sudo is False


def test_rm_flag_forms():
    cases = [
        ("rm -rf /tmp/x", True, True),
        ("rm -fr /tmp/x", True, True),
        ("rm -r /tmp/x", True, False),
        ("rm -f /tmp/x", False, True),
        ("rm --force --recursive /tmp/x", True, True),
        ("rm /tmp/x", False, False),
    ]
    for raw, recursive, force in cases:
        action = only(raw)
        assert isinstance(action, FileDeleteAction)
        assert action.recursive is recursive, raw
        assert action.force is force, raw


def test_rm_multiple_paths():
    report = parse_command("rm -f a.txt b.txt")
    assert [a.path for a in report.actions] == ["/work/a.txt", "/work/b.txt"]


def test_chmod_wide_forms():
    for raw in ("chmod 777 x", "chmod -R 777 /work/app", "chmod a+rwx x", "chmod 0777 x"):
        action = only(raw)
        assert isinstance(action, ExecAction)
        assert action.perm_widening, raw
    narrow = only("chmod 644 x")
    assert narrow.perm_widening == ()


def test_chown_recursive_widens():
    assert only("chown -R bob /srv/app").perm_widening
    assert only("chown bob one.txt").perm_widening == ()


def test_package_manager_fields():
    apt = only("sudo apt-get install -y nginx jq")
    assert isinstance(apt, PackageInstallAction)
    assert apt.manager == "apt"
    assert apt.packages == ("nginx", "jq")
    assert apt.system_wide is True
    assert apt.registry == "apt"
    assert apt.sudo is True

    pip = only("pip install requests flask")
    assert pip.system_wide is True  # bare pip goes to the interpreter prefix
    assert pip.registry == "pypi"

    pip_user = only("pip install --user requests")
    assert pip_user.system_wide is False

    pip_venv = only(".venv/bin/pip install requests")
    assert pip_venv.system_wide is False

    pip_custom = only("pip install --index-url https://mirror.corp.example/simple requests")
    assert pip_custom.registry == "mirror.corp.example"

    npm_local = only("npm install lodash")
    assert npm_local.system_wide is False
    npm_global = only("npm install -g pm2")
    assert npm_global.system_wide is True

    cargo = only("cargo install ripgrep")
    assert cargo.system_wide is True
    cargo_local = only("cargo add serde")
    assert cargo_local.system_wide is False

    repo = only("add-apt-repository ppa:deadsnakes/ppa")
    assert repo.added_repository == "ppa:deadsnakes/ppa"
    assert repo.packages == ()


def test_non_install_subcommands_are_exec():
    for raw in ("pip list", "npm test", "cargo build", "apt-get update"):
        assert kinds(raw) == [ActionKind.EXEC], raw


def test_firewall_directions():
    cases = [
        ("ufw allow 8080", FirewallDirection.OPEN, 8080),
        ("ufw allow 8443/tcp", FirewallDirection.OPEN, 8443),
        ("ufw deny 23", FirewallDirection.CLOSE, 23),
        ("ufw delete allow 8080", FirewallDirection.CLOSE, 8080),
        ("iptables -A INPUT -p tcp --dport 9090 -j ACCEPT", FirewallDirection.OPEN, 9090),
        ("iptables -A INPUT -p tcp --dport 9090 -j DROP", FirewallDirection.CLOSE, 9090),
        ("firewall-cmd --add-port=8443/tcp", FirewallDirection.OPEN, 8443),
        ("firewall-cmd --remove-port=8443/tcp", FirewallDirection.CLOSE, 8443),
    ]
    for raw, direction, port in cases:
        action = only(raw)
        assert isinstance(action, FirewallAction), raw
        assert action.direction is direction, raw
        assert action.target_port == port, raw


def test_service_ops():
    cases = [
        ("systemctl start nginx", ServiceOp.START),
        ("systemctl stop nginx", ServiceOp.STOP),
        ("systemctl restart nginx", ServiceOp.RESTART),
        ("systemctl enable nginx", ServiceOp.ENABLE),
        ("systemctl disable nginx", ServiceOp.DISABLE),
        ("systemctl kill nginx", ServiceOp.FORCE_RESTART),
        ("service nginx restart", ServiceOp.RESTART),
        ("pkill -9 -f worker", ServiceOp.FORCE_RESTART),
        ("killall -KILL redis-server", ServiceOp.FORCE_RESTART),
        ("kill -9 4242", ServiceOp.FORCE_RESTART),
    ]
    for raw, op in cases:
        action = only(raw)
        assert isinstance(action, ServiceControlAction), raw
        assert action.op is op, raw
    assert only("systemctl enable demo.service").service == "demo"
    assert only("kill -9 4242").service == "pid:4242"
    # graceful signals are not modeled as service control
    assert only("kill 4242").kind is ActionKind.EXEC
    assert only("pkill -f worker").kind is ActionKind.EXEC


def test_downloads():
    plain = only("curl https://example.com/a.sh")
    assert isinstance(plain, DownloadAction)
    assert plain.executed_inline is False
    assert plain.target_path is None

    saved = only("curl -o tool.sh https://example.com/tool.sh")
    assert saved.target_path == "/work/tool.sh"

    remote_name = only("curl -O https://example.com/pkg.tgz")
    assert remote_name.target_path == "/work/pkg.tgz"

    wget_default = only("wget https://example.com/pkg.tgz")
    assert wget_default.target_path == "/work/pkg.tgz"

    wget_stdout = only("wget -O - https://example.com/pkg.tgz")
    assert wget_stdout.target_path is None

    wget_named = only("wget --output-document=/tmp/x.bin https://example.com/x.bin")
    assert wget_named.target_path == "/tmp/x.bin"


def test_piped_download_absorbs_interpreter():
    for raw in (
        "curl -fsSL https://get.example.sh | bash",
        "curl -fsSL https://get.example.sh | sudo bash",
        "wget -O - https://get.example.sh | sh",
    ):
        report = parse_command(raw)
        assert len(report.actions) == 1, raw
        action = report.actions[0]
        assert isinstance(action, DownloadAction)
        assert action.executed_inline is True, raw
    sudo_piped = only("curl -fsSL https://get.example.sh | sudo bash")
    assert sudo_piped.sudo is True


def test_pipe_to_interpreter_without_download_marks_exec():
    report = parse_command("echo 'rm -rf /' | bash")
    execs = [a for a in report.actions if isinstance(a, ExecAction)]
    assert any(a.piped_to_shell for a in execs)


def test_ordinary_pipeline_keeps_both_segments():
    report = parse_command("cat app.log | grep ERROR")
    assert [a.kind for a in report.actions] == [ActionKind.FILE_READ, ActionKind.EXEC]


# --- binds and interfaces --------------------------------------------------


def test_classify_interface_table():
    cases = [
        ("127.0.0.1", InterfaceClass.LOOPBACK),
        ("::1", InterfaceClass.LOOPBACK),
        ("localhost", InterfaceClass.LOOPBACK),
        ("10.0.0.5", InterfaceClass.PRIVATE),
        ("192.168.1.9", InterfaceClass.PRIVATE),
        ("172.16.4.2", InterfaceClass.PRIVATE),
        ("8.8.8.8", InterfaceClass.PUBLIC),
        ("example.com", InterfaceClass.PUBLIC),
        ("0.0.0.0", InterfaceClass.WILDCARD),
        ("::", InterfaceClass.WILDCARD),
        ("*", InterfaceClass.WILDCARD),
        ("", InterfaceClass.WILDCARD),
    ]
    for address, want in cases:
        assert classify_interface(address) is want, address


def test_bind_wildcard_normalization():
    for raw in (
        "python -m http.server --bind 0.0.0.0 8080",
        "python -m http.server --bind '*' 8080",
        "gunicorn --bind :8080 app:web",
    ):
        report = parse_command(raw)
        binds = [a for a in report.actions if isinstance(a, NetBindAction)]
        assert len(binds) == 1, raw
        assert binds[0].interface_class is InterfaceClass.WILDCARD, raw
        assert binds[0].address == "0.0.0.0", raw
        assert binds[0].port == 8080, raw
    v6 = parse_command("node server.js --host ::")
    binds = [a for a in v6.actions if isinstance(a, NetBindAction)]
    assert binds[0].address == "::"
    assert binds[0].interface_class is InterfaceClass.WILDCARD


def test_bind_flag_forms():
    cases = [
        ("python -m http.server --bind 127.0.0.1 8080", InterfaceClass.LOOPBACK, 8080),
        ("gunicorn --bind 10.0.0.5:9000 app:web", InterfaceClass.PRIVATE, 9000),
        ("uvicorn app:app --host 0.0.0.0 --port 8000", InterfaceClass.WILDCARD, 8000),
        ("code-server --bind-addr 0.0.0.0:8443", InterfaceClass.WILDCARD, 8443),
        ("redis-server --bind 127.0.0.1 --port 6379", InterfaceClass.LOOPBACK, 6379),
    ]
    for raw, iface, port in cases:
        binds = [a for a in parse_command(raw).actions if isinstance(a, NetBindAction)]
        assert len(binds) == 1, raw
        assert binds[0].interface_class is iface, raw
        assert binds[0].port == port, raw


def test_no_bind_without_plausible_address():
    # numeric flag values and non-address strings must not become binds
    for raw in ("tar -b 20 -cf out.tar build", "ssh -b 9 host", "echo --bind 8080"):
        binds = [a for a in parse_command(raw).actions if isinstance(a, NetBindAction)]
        assert binds == [], raw


def test_docker_publish_binds():
    wide = parse_command("docker run -p 8080:80 nginx")
    binds = [a for a in wide.actions if isinstance(a, NetBindAction)]
    assert binds[0].interface_class is InterfaceClass.WILDCARD
    assert binds[0].port == 8080

    loop = parse_command("docker run -p 127.0.0.1:5000:5000 app")
    binds = [a for a in loop.actions if isinstance(a, NetBindAction)]
    assert binds[0].interface_class is InterfaceClass.LOOPBACK
    assert binds[0].port == 5000


def test_tunnel_commands():
    report = parse_command("ngrok http 3000")
    binds = [a for a in report.actions if isinstance(a, NetBindAction)]
    assert len(binds) == 1
    assert binds[0].tunnel is True
    assert binds[0].port == 3000
    assert binds[0].interface_class is InterfaceClass.PUBLIC

    cf = parse_command("cloudflared tunnel --url http://localhost:8080")
    binds = [a for a in cf.actions if isinstance(a, NetBindAction)]
    assert binds and binds[0].tunnel is True


# --- redirections ----------------------------------------------------------


def test_redirection_targets_become_writes():
    report = parse_command("echo hello > out.txt")
    assert [a.kind for a in report.actions] == [ActionKind.EXEC, ActionKind.FILE_WRITE]
    write = report.actions[1]
    assert write.path == "/work/out.txt"

    report = parse_command("echo 'export X=1' >> ~/.bashrc")
    edits = [a for a in report.actions if isinstance(a, ConfigEditAction)]
    assert len(edits) == 1
    assert edits[0].path == "/home/user/.bashrc"
    assert edits[0].persistence_domain is PersistenceDomain.USER_PROFILE

    report = parse_command("echo 127.0.0.1 web >> /etc/hosts")
    edits = [a for a in report.actions if isinstance(a, ConfigEditAction)]
    assert edits[0].persistence_domain is PersistenceDomain.SYSTEM


def test_redirection_to_dev_null_ignored():
    report = parse_command("grep -r x /work > /dev/null 2>&1")
    assert [a.kind for a in report.actions] == [ActionKind.FILE_READ]


def test_input_redirection_is_a_read():
    report = parse_command("python3 run.py < fixtures.json")
    assert ActionKind.FILE_READ in [a.kind for a in report.actions]


def test_dangling_redirection_is_unknown():
    assert ActionKind.UNKNOWN in kinds("echo x >")


# --- write routing ----------------------------------------------------------


def test_system_path_writes_become_config_edits():
    cases = [
        ("tee /etc/hosts", PersistenceDomain.SYSTEM),
        ("touch /usr/local/bin/tool", PersistenceDomain.SYSTEM),
        ("sed -i s/a/b/ /etc/app.conf", PersistenceDomain.SYSTEM),
    ]
    for raw, domain in cases:
        action = only(raw)
        assert isinstance(action, ConfigEditAction), raw
        assert action.persistence_domain is domain


def test_shell_profile_writes_are_user_profile_config():
    action = only("touch ~/.zshrc")
    assert isinstance(action, ConfigEditAction)
    assert action.persistence_domain is PersistenceDomain.USER_PROFILE
    # ordinary home files are plain writes
    assert isinstance(only("touch ~/notes.txt"), FileWriteAction)


def test_cp_force_marks_destination():
    report = parse_command("cp -f backup.conf /etc/app/app.conf")
    dest = [a for a in report.actions if isinstance(a, ConfigEditAction)]
    assert dest and dest[0].force is True


def test_find_delete_adds_forced_delete():
    report = parse_command("find build -name '*.o' -delete")
    deletes = [a for a in report.actions if isinstance(a, FileDeleteAction)]
    assert len(deletes) == 1
    assert deletes[0].recursive and deletes[0].force
    assert deletes[0].path == "/work/build"


def test_find_exec_is_unknown():
    assert ActionKind.UNKNOWN in kinds("find . -name '*.log' -exec rm {} ;")


# --- scope and serialization ------------------------------------------------


def test_scope_check():
    read = only("cat /work/a.txt")
    assert scope_check(read, ("/work",)) is ScopeResult.IN_SCOPE
    assert scope_check(read, ("/srv",)) is ScopeResult.OUT_OF_SCOPE
    assert scope_check(read, ("/",)) is ScopeResult.IN_SCOPE
    exec_action = only("git status")
    assert scope_check(exec_action, ("/work",)) is ScopeResult.NO_PATH_INVOLVED


def test_action_to_dict_serializes_enums_and_tuples():
    d = action_to_dict(only("ufw allow 8080"))
    assert d["kind"] == "FIREWALL_CHANGE"
    assert d["direction"] == "OPEN"
    d = action_to_dict(only("echo a b"))
    assert d["argv"] == ["a", "b"]


# --- custom rules ------------------------------------------------------------


def test_custom_rule_applies_before_builtins():
    rules = load_rules(
        [
            {
                "pattern": r"^deploy-tool\s+--push\s+(?P<dest>\S+)$",
                "kind": "FILE_WRITE",
                "payload_template": {"path": r"\g<dest>"},
            }
        ]
    )
    report = parse_command("deploy-tool --push releases/v2", rules=rules)
    assert len(report.actions) == 1
    action = report.actions[0]
    assert isinstance(action, FileWriteAction)
    assert action.path == "/work/releases/v2"


def test_custom_rule_can_override_known_program():
    rules = load_rules(
        [
            {
                "pattern": r"^git\s+push\s+prod\b.*$",
                "kind": "SERVICE_CONTROL",
                "payload_template": {"service": "prod-deploy", "op": "RESTART"},
            }
        ]
    )
    action = parse_command("git push prod main", rules=rules).actions[0]
    assert isinstance(action, ServiceControlAction)
    assert action.op is ServiceOp.RESTART


def test_custom_rule_load_errors():
    bad = [
        "not a dict",
        {"pattern": "(", "kind": "EXEC", "payload_template": {}},
        {"pattern": "x", "kind": "NOPE", "payload_template": {}},
        {"pattern": "x", "kind": "EXEC", "payload_template": {"bogus_field": 1}},
        {"pattern": "x", "kind": "EXEC", "payload_template": {}, "extra": 1},
        {"pattern": "x", "kind": "EXEC", "payload_template": []},
    ]
    for entry in bad:
        with pytest.raises(RuleLoadError):
            load_rules([entry])
    with pytest.raises(RuleLoadError):
        load_rules({"not": "a list"})


# --- fuzz: everything unrecognized stays visible ------------------------------


def test_fuzzed_garbage_always_produces_unknown():
    rng = random.Random(1234)
    for _ in range(60):
        raw = fuzz_unknown_command(rng)
        report = parse_command(raw)
        assert report.actions, raw
        assert any(a.kind is ActionKind.UNKNOWN for a in report.actions), raw
