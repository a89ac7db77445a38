"""CLI contract: exit codes, machine-readable output, config precedence."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from warp2.cli import EXIT_NETWORK, EXIT_OK, EXIT_USER, main

GOLDEN = Path(__file__).parent / "data" / "golden_plan.jsonl"


@pytest.fixture(autouse=True)
def cli_env(tmp_path, monkeypatch):
    """Isolate every test from the real user environment."""
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "config"))
    monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "data"))
    monkeypatch.setenv("WARP2_PASSPHRASE", "test-passphrase")
    for var in ("WARP2_SERVER_URL", "WARP2_DATA_DIR", "WARP2_IDENTITY", "WARP2_OUTPUT", "WARP2_CONFIG"):
        monkeypatch.delenv(var, raising=False)
    return tmp_path


def run_cli(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def lines(out: str) -> list[dict]:
    return [json.loads(line) for line in out.splitlines() if line]


class TestPlan:
    def test_machine_output_matches_golden_line(self, capsys):
        rc, out, _ = run_cli(
            capsys, "--json", "plan", "--users", "1000", "--rate", "10", "--header-size", "1000"
        )
        assert rc == EXIT_OK
        assert out == GOLDEN.read_text()

    def test_golden_line_is_valid_schema_tagged_json(self):
        record = json.loads(GOLDEN.read_text())
        assert record["schema"] == "warp2.cli/1"
        assert record["event"] == "plan"

    def test_human_output_shows_headline_figures(self, capsys):
        rc, out, _ = run_cli(
            capsys, "plan", "--users", "1000", "--rate", "10", "--header-size", "1000"
        )
        assert rc == EXIT_OK
        assert "10.0 MB" in out
        assert "10.0 GB" in out

    def test_default_header_size_is_this_builds(self, capsys):
        from warp2.header import HEADER_CT_SIZE

        rc, out, _ = run_cli(capsys, "--json", "plan")
        assert rc == EXIT_OK
        record = lines(out)[0]
        assert record["header_ct_size"] == HEADER_CT_SIZE
        assert record["daily_new_header_bytes"] == 1000 * 10 * HEADER_CT_SIZE

    def test_bad_parameters_are_user_errors(self, capsys):
        rc, _, err = run_cli(capsys, "plan", "--users", "0")
        assert rc == EXIT_USER
        assert "users" in err

    def test_runs_from_a_fresh_interpreter(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "warp2.cli", "--json", "plan",
             "--users", "1000", "--rate", "10", "--header-size", "1000"],
            capture_output=True,
            text=True,
            timeout=60,
        )
        assert result.returncode == EXIT_OK
        assert result.stdout == GOLDEN.read_text()


class TestUsageErrors:
    def test_unknown_subcommand(self, capsys):
        rc, _, _ = run_cli(capsys, "frobnicate")
        assert rc == EXIT_USER

    def test_missing_required_flag(self, capsys):
        rc, _, _ = run_cli(capsys, "send", "--subject", "no recipient")
        assert rc == EXIT_USER

    def test_help_exits_zero(self, capsys):
        rc, out, _ = run_cli(capsys, "--help")
        assert rc == EXIT_OK
        assert "keygen" in out


class TestIdentityAndContacts:
    def test_keygen_then_duplicate_fails(self, capsys, tmp_path):
        d = str(tmp_path / "home-a")
        rc, out, _ = run_cli(capsys, "--json", "--data-dir", d, "keygen", "--address", "alice")
        assert rc == EXIT_OK
        record = lines(out)[0]
        assert record["event"] == "keygen"
        assert record["address"] == "alice"
        assert record["public_key"]

        rc, _, err = run_cli(capsys, "--json", "--data-dir", d, "keygen", "--address", "alice")
        assert rc == EXIT_USER
        assert "already exists" in lines(err)[0]["message"]

    def test_data_dir_created_owner_only(self, capsys, tmp_path):
        d = tmp_path / "fresh" / "nested"
        rc, _, _ = run_cli(capsys, "--data-dir", str(d), "keygen", "--address", "a")
        assert rc == EXIT_OK
        assert d.stat().st_mode & 0o777 == 0o700

    def test_wrong_passphrase_is_user_error(self, capsys, tmp_path, monkeypatch):
        d = str(tmp_path / "home")
        assert run_cli(capsys, "--data-dir", d, "keygen", "--address", "a")[0] == EXIT_OK
        monkeypatch.setenv("WARP2_PASSPHRASE", "different")
        rc, _, err = run_cli(capsys, "--data-dir", d, "list")
        assert rc == EXIT_USER
        assert "passphrase" in err

    def test_contact_add_requires_valid_key(self, capsys, tmp_path):
        d = str(tmp_path / "home")
        run_cli(capsys, "--data-dir", d, "keygen", "--address", "a")
        rc, _, _ = run_cli(capsys, "--data-dir", d, "contacts", "add", "bob", "garbage-key")
        assert rc == EXIT_USER
        rc, out, _ = run_cli(capsys, "--json", "--data-dir", d, "contacts", "list")
        assert rc == EXIT_OK
        assert lines(out) == []


class TestConfigPrecedence:
    def test_flags_beat_env_beat_file(self, capsys, tmp_path, monkeypatch):
        file_dir = tmp_path / "from-file"
        env_dir = tmp_path / "from-env"
        flag_dir = tmp_path / "from-flag"
        cfg = tmp_path / "config" / "warp2"
        cfg.mkdir(parents=True)
        (cfg / "config.json").write_text(json.dumps({"data_dir": str(file_dir)}))

        # file only
        rc, _, _ = run_cli(capsys, "keygen", "--address", "f")
        assert rc == EXIT_OK
        assert (file_dir / "default.state").exists()

        # env overrides file
        monkeypatch.setenv("WARP2_DATA_DIR", str(env_dir))
        rc, _, _ = run_cli(capsys, "keygen", "--address", "e")
        assert rc == EXIT_OK
        assert (env_dir / "default.state").exists()

        # flag overrides env
        rc, _, _ = run_cli(capsys, "--data-dir", str(flag_dir), "keygen", "--address", "g")
        assert rc == EXIT_OK
        assert (flag_dir / "default.state").exists()

    def test_malformed_config_file_is_user_error(self, capsys, tmp_path):
        cfg = tmp_path / "config" / "warp2"
        cfg.mkdir(parents=True)
        (cfg / "config.json").write_text("{not json")
        rc, _, err = run_cli(capsys, "plan")
        assert rc == EXIT_USER
        assert "config file" in err


class TestNetworkErrors:
    def test_send_with_unreachable_server_queues_and_exits_2(self, capsys, tmp_path):
        d = str(tmp_path / "home")
        run_cli(capsys, "--data-dir", d, "keygen", "--address", "a")
        from warp2 import crypto

        peer = crypto.export_public_key(crypto.generate_keypair().public_part)
        run_cli(capsys, "--data-dir", d, "contacts", "add", "bob", peer)

        rc, out, _ = run_cli(
            capsys, "--json", "--data-dir", d, "--server-url", "http://127.0.0.1:1",
            "send", "--to", "bob", "--subject", "s", "--body", "b",
        )
        assert rc == EXIT_NETWORK
        assert lines(out)[0]["queued"] is True

    def test_sync_with_unreachable_server_exits_2(self, capsys, tmp_path):
        d = str(tmp_path / "home")
        run_cli(capsys, "--data-dir", d, "keygen", "--address", "a")
        rc, _, err = run_cli(
            capsys, "--json", "--data-dir", d, "--server-url", "http://127.0.0.1:1", "sync"
        )
        assert rc == EXIT_NETWORK
        assert lines(err)[0]["code"] == "NetworkFailure"


class TestTwoTerminalDemo:
    def test_full_exchange(self, capsys, tmp_path, live_server):
        """A sends, B syncs + reads + acks, A's next sync observes the purge."""
        url = live_server.url
        home_a = str(tmp_path / "home-a")
        home_b = str(tmp_path / "home-b")

        def a(*argv):
            return run_cli(capsys, "--json", "--data-dir", home_a, "--server-url", url, *argv)

        def b(*argv):
            return run_cli(capsys, "--json", "--data-dir", home_b, "--server-url", url, *argv)

        rc, out, _ = a("keygen", "--address", "alice")
        assert rc == EXIT_OK
        alice_pub = lines(out)[0]["public_key"]
        rc, out, _ = b("keygen", "--address", "bob")
        assert rc == EXIT_OK
        bob_pub = lines(out)[0]["public_key"]

        assert a("contacts", "add", "bob", bob_pub)[0] == EXIT_OK
        assert b("contacts", "add", "alice", alice_pub)[0] == EXIT_OK

        # unknown alias: exit 1, nothing uploaded
        rc, _, err = a("send", "--to", "charlie", "--subject", "s", "--body", "x")
        assert rc == EXIT_USER
        assert lines(err)[0]["code"] == "UnknownContact"
        assert live_server.store.stats().live == 0

        attachment = tmp_path / "photo.bin"
        attachment.write_bytes(bytes(range(256)) * 40)
        rc, out, _ = a(
            "send", "--to", "bob", "--subject", "hello bob",
            "--body", "see attachment", "--attach", str(attachment),
        )
        assert rc == EXIT_OK
        sent = lines(out)[0]
        assert sent["queued"] is False
        hid = sent["header_id"]

        rc, out, _ = b("sync")
        assert rc == EXIT_OK
        assert lines(out)[0]["new_message_ids"] == [hid]

        rc, out, _ = b("list")
        assert rc == EXIT_OK
        listing = lines(out)
        assert len(listing) == 1
        assert listing[0]["id"] == hid
        assert listing[0]["subject"] == "hello bob"
        assert listing[0]["has_attachment"] is True

        saved = tmp_path / "saved.bin"
        rc, out, _ = b("read", hid[:12], "--save-attachment", str(saved))
        assert rc == EXIT_OK
        record = lines(out)[0]
        assert record["body"] == "see attachment"
        assert record["sender"] == "alice"
        assert saved.read_bytes() == attachment.read_bytes()

        rc, out, _ = b("ack", hid[:12])
        assert rc == EXIT_OK
        assert lines(out)[0]["purged"] is True
        assert live_server.store.stats().purged == 1

        rc, out, _ = a("sync")
        assert rc == EXIT_OK
        assert lines(out)[0]["delivered_ids"] == [hid]

        # A's list now shows the sent message as delivered (purged from server)
        rc, out, _ = a("list")
        assert lines(out)[0]["purged_from_server"] is True
