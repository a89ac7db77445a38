"""Command-line entry point.

Exit codes: 0 success, 1 user error, 2 network error, 3 internal error.
With --json, every logical record is printed as one JSON object per line
(schema-tagged), so the output is greppable and stable for scripting.

Config precedence is flags > environment > config file.  Passphrases are
never taken from argv: WARP2_PASSPHRASE, WARP2_PASSPHRASE_FILE, or an
interactive prompt.
"""

from __future__ import annotations

import argparse
import base64
import getpass
import json
import os
import sys
from pathlib import Path

from . import crypto
from .client import (
    ClientConfig,
    DuplicateAlias,
    MailClient,
    NotInMailstore,
    RotationPending,
    StateFileError,
    UnknownContact,
)
from .load import LoadParams, estimate
from .transport import HttpInboxTransport, NetworkFailure, ServerRejected

SCHEMA = "warp2.cli/1"

EXIT_OK = 0
EXIT_USER = 1
EXIT_NETWORK = 2
EXIT_INTERNAL = 3

_USER_ERRORS = (
    UnknownContact,
    DuplicateAlias,
    NotInMailstore,
    RotationPending,
    StateFileError,
    crypto.InvalidPublicKey,
    ValueError,
)


class _Cli:
    """Resolved configuration plus output helpers for one invocation."""

    def __init__(self, args: argparse.Namespace) -> None:
        file_cfg = self._read_config_file(args)
        env = os.environ

        def pick(flag, env_key, file_key, default):
            if flag is not None:
                return flag
            if env.get(env_key):
                return env[env_key]
            if file_cfg.get(file_key) is not None:
                return file_cfg[file_key]
            return default

        self.server_url = pick(args.server_url, "WARP2_SERVER_URL", "server_url", "http://127.0.0.1:9620")
        self.data_dir = Path(
            pick(args.data_dir, "WARP2_DATA_DIR", "data_dir", self._default_data_dir())
        )
        self.identity = pick(args.identity, "WARP2_IDENTITY", "identity", "default")
        mode = pick("json" if args.json else None, "WARP2_OUTPUT", "output", "human")
        self.machine = mode == "json"

    @staticmethod
    def _read_config_file(args: argparse.Namespace) -> dict:
        path = args.config or os.environ.get("WARP2_CONFIG")
        if path is None:
            base = os.environ.get("XDG_CONFIG_HOME", str(Path.home() / ".config"))
            path = Path(base) / "warp2" / "config.json"
        path = Path(path)
        if not path.is_file():
            return {}
        try:
            cfg = json.loads(path.read_text())
        except ValueError as exc:
            raise ValueError(f"config file {path}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValueError(f"config file {path}: expected a JSON object")
        return cfg

    @staticmethod
    def _default_data_dir() -> str:
        base = os.environ.get("XDG_DATA_HOME", str(Path.home() / ".local" / "share"))
        return str(Path(base) / "warp2")

    # -- output ---------------------------------------------------------------

    def emit(self, event: str, human: str, **fields) -> None:
        if self.machine:
            record = {"schema": SCHEMA, "event": event, **fields}
            print(json.dumps(record, sort_keys=True))
        else:
            print(human)

    def fail(self, code: str, message: str) -> None:
        if self.machine:
            print(
                json.dumps(
                    {"schema": SCHEMA, "event": "error", "code": code, "message": message},
                    sort_keys=True,
                ),
                file=sys.stderr,
            )
        else:
            print(f"error: {message}", file=sys.stderr)

    # -- plumbing ---------------------------------------------------------------

    @property
    def state_path(self) -> Path:
        return self.data_dir / f"{self.identity}.state"

    def passphrase(self, confirm: bool = False) -> str:
        if os.environ.get("WARP2_PASSPHRASE"):
            return os.environ["WARP2_PASSPHRASE"]
        path = os.environ.get("WARP2_PASSPHRASE_FILE")
        if path:
            return Path(path).read_text().strip()
        if not sys.stdin.isatty():
            raise ValueError(
                "no passphrase: set WARP2_PASSPHRASE or WARP2_PASSPHRASE_FILE "
                "when running non-interactively"
            )
        phrase = getpass.getpass("passphrase: ")
        if confirm and getpass.getpass("repeat passphrase: ") != phrase:
            raise ValueError("passphrases do not match")
        return phrase

    def open_client(self, address: str | None = None) -> MailClient:
        self.data_dir.mkdir(parents=True, exist_ok=True, mode=0o700)
        if address is None and not self.state_path.exists():
            raise ValueError(
                f"no identity at {self.state_path}; run `warp2 keygen --address <name>` first"
            )
        return MailClient(
            self.state_path,
            passphrase=self.passphrase(confirm=address is not None),
            transport=HttpInboxTransport(self.server_url),
            address=address,
            config=ClientConfig(),
        )


def _fmt_bytes(n: int) -> str:
    for unit, scale in (("GB", 10**9), ("MB", 10**6), ("kB", 10**3)):
        if n >= scale:
            return f"{n / scale:.1f} {unit}"
    return f"{n} B"


# -- subcommand bodies -----------------------------------------------------------


def cmd_keygen(cli: _Cli, args) -> int:
    if cli.state_path.exists():
        raise ValueError(f"identity already exists at {cli.state_path}")
    client = cli.open_client(address=args.address)
    pub = crypto.export_public_key(client.identity_public_key())
    cli.emit(
        "keygen",
        f"created identity {args.address!r} at {cli.state_path}\npublic key: {pub}",
        address=args.address,
        public_key=pub,
        state_path=str(cli.state_path),
    )
    return EXIT_OK


def cmd_contacts(cli: _Cli, args) -> int:
    client = cli.open_client()
    if args.contacts_cmd == "add":
        contact = client.import_contact(args.alias, args.key)
        cli.emit(
            "contact-added",
            f"added {args.alias!r}",
            alias=contact.alias,
            rotation_state=contact.rotation_state,
        )
    elif args.contacts_cmd == "remove":
        client.remove_contact(args.alias)
        cli.emit("contact-removed", f"removed {args.alias!r}", alias=args.alias)
    else:
        for c in client.contacts.values():
            cli.emit(
                "contact",
                f"{c.alias}  [{c.rotation_state}]  {crypto.export_public_key(c.current_pub)}",
                alias=c.alias,
                rotation_state=c.rotation_state,
                public_key=crypto.export_public_key(c.current_pub),
            )
    return EXIT_OK


def cmd_send(cli: _Cli, args) -> int:
    client = cli.open_client()
    if args.body is not None:
        body = args.body.encode("utf-8")
    elif not sys.stdin.isatty():
        body = sys.stdin.buffer.read()
    else:
        body = b""
    attachment = Path(args.attach).read_bytes() if args.attach else None
    header_id = client.send(args.to, args.subject, body, attachment)
    queued = any(p["header_id"] == header_id for p in client.pending_uploads)
    cli.emit(
        "send",
        f"{'queued (server unreachable)' if queued else 'sent'} {header_id}",
        header_id=header_id,
        queued=queued,
    )
    return EXIT_NETWORK if queued else EXIT_OK


def cmd_sync(cli: _Cli, args) -> int:
    client = cli.open_client()
    r = client.sync()
    cli.emit(
        "sync",
        f"synced to cursor {r.cursor}: {len(r.new_message_ids)} new, "
        f"{r.skipped} not ours, {len(r.delivered_ids)} delivered",
        cursor=r.cursor,
        new_message_ids=r.new_message_ids,
        skipped=r.skipped,
        quarantined=r.quarantined,
        attempted_decrypts=r.attempted_decrypts,
        delivered_ids=r.delivered_ids,
    )
    return EXIT_OK


def cmd_list(cli: _Cli, args) -> int:
    client = cli.open_client()
    for m in client.all_messages():
        flags = "".join(
            (
                "r" if m.read else "·",
                "a" if m.acked else "·",
                "p" if m.purged_from_server else "·",
            )
        )
        peer = m.to_addr if m.direction == "sent" else m.from_addr
        arrow = "→" if m.direction == "sent" else "←"
        cli.emit(
            "message",
            f"{m.header_id[:12]}  {flags}  {m.date}  {arrow} {peer:12s}  {m.subject}",
            id=m.header_id,
            direction=m.direction,
            peer=peer,
            date=m.date,
            subject=m.subject,
            read=m.read,
            acked=m.acked,
            purged_from_server=m.purged_from_server,
            has_attachment=m.attachment is not None,
        )
    return EXIT_OK


def _resolve_id(client: MailClient, prefix: str) -> str:
    matches = [
        hid
        for hid in list(client.mailstore) + list(client.outbox)
        if hid.startswith(prefix)
    ]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise NotInMailstore(prefix)
    raise ValueError(f"ambiguous id prefix {prefix!r} ({len(matches)} matches)")


def cmd_read(cli: _Cli, args) -> int:
    client = cli.open_client()
    hid = _resolve_id(client, args.id)
    m = client.get_message(hid)
    client.mark_read(hid)
    saved = None
    if m.attachment is not None and args.save_attachment:
        Path(args.save_attachment).write_bytes(m.attachment)
        saved = args.save_attachment
    body_text = m.body.decode("utf-8", errors="replace")
    human = (
        f"id:      {m.header_id}\n"
        f"from:    {m.from_addr}\n"
        f"to:      {m.to_addr}\n"
        f"date:    {m.date}\n"
        f"subject: {m.subject}\n"
        + (f"attachment: {len(m.attachment)} bytes"
           + (f" (saved to {saved})" if saved else " (use --save-attachment)") + "\n"
           if m.attachment is not None else "")
        + f"\n{body_text}"
    )
    cli.emit(
        "read",
        human,
        id=m.header_id,
        direction=m.direction,
        to=m.to_addr,
        sender=m.from_addr,
        date=m.date,
        subject=m.subject,
        body=body_text,
        attachment_b64=base64.b64encode(m.attachment).decode("ascii")
        if m.attachment is not None
        else None,
    )
    return EXIT_OK


def cmd_ack(cli: _Cli, args) -> int:
    client = cli.open_client()
    hid = _resolve_id(client, args.id)
    purged = client.acknowledge(hid)
    cli.emit(
        "ack",
        f"{'purged from server' if purged else 'server copy already gone'}: {hid}",
        id=hid,
        purged=purged,
    )
    return EXIT_OK


def cmd_rotate(cli: _Cli, args) -> int:
    client = cli.open_client()
    header_id = client.rotate_keys(args.alias)
    cli.emit(
        "rotate",
        f"rotation offered to {args.alias!r} ({header_id[:12]}); "
        "completes when their key arrives on the next sync",
        alias=args.alias,
        header_id=header_id,
        rotation_state=client.contacts[args.alias].rotation_state,
    )
    return EXIT_OK


def cmd_plan(cli: _Cli, args) -> int:
    kwargs = {}
    if args.header_size is not None:
        kwargs["header_ct_size"] = args.header_size
    params = LoadParams(
        users=args.users,
        messages_per_user_per_day=args.rate,
        syncs_per_user_per_day=args.syncs,
        **kwargs,
    )
    est = estimate(params)
    human = (
        f"{params.users} users x {params.messages_per_user_per_day} msg/day "
        f"x {params.header_ct_size}-byte headers, "
        f"{params.syncs_per_user_per_day} sync(s)/day\n"
        f"  new header data per day:     {_fmt_bytes(est.daily_new_header_bytes)}\n"
        f"  per-client decrypt volume:   {_fmt_bytes(est.per_client_daily_decrypt_bytes)}/day\n"
        f"  server egress (upper bound): {_fmt_bytes(est.server_daily_egress_bytes)}/day\n"
        f"  trial decryptions per client per day: {est.trial_decryptions_per_client_per_day}"
    )
    cli.emit(
        "plan",
        human,
        users=params.users,
        messages_per_user_per_day=params.messages_per_user_per_day,
        header_ct_size=params.header_ct_size,
        syncs_per_user_per_day=params.syncs_per_user_per_day,
        daily_new_header_bytes=est.daily_new_header_bytes,
        per_client_daily_decrypt_bytes=est.per_client_daily_decrypt_bytes,
        server_daily_egress_bytes=est.server_daily_egress_bytes,
        trial_decryptions_per_client_per_day=est.trial_decryptions_per_client_per_day,
    )
    return EXIT_OK


def cmd_daemon(cli: _Cli, args) -> int:
    from .daemon import run_daemon

    client = cli.open_client()
    run_daemon(client, cli.server_url, host=args.host, port=args.port)
    return EXIT_OK


def cmd_serve(cli: _Cli, args) -> int:
    from .server import ServerConfig, run_server

    config = ServerConfig.load(args.config_file)
    if args.host:
        config.listen_host = args.host
    if args.port is not None:
        config.listen_port = args.port
    if args.server_data_dir:
        config.data_dir = args.server_data_dir
    run_server(config)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warp2",
        description="metadata-hiding mail over a shared encrypted pool",
    )
    parser.add_argument("--json", action="store_true", help="one JSON object per line")
    parser.add_argument("--config", help="config file path (JSON)")
    parser.add_argument("--server-url", help="inbox server base URL")
    parser.add_argument("--data-dir", help="local state directory")
    parser.add_argument("--identity", help="identity name within the data directory")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("keygen", help="create a new identity")
    p.add_argument("--address", required=True, help="your address/alias as contacts will see it")
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("contacts", help="manage contacts")
    csub = p.add_subparsers(dest="contacts_cmd", required=True)
    c = csub.add_parser("add", help="import a contact's public key")
    c.add_argument("alias")
    c.add_argument("key", help="their exported public key")
    c = csub.add_parser("list", help="list contacts")
    c = csub.add_parser("remove", help="forget a contact")
    c.add_argument("alias")
    p.set_defaults(fn=cmd_contacts)

    p = sub.add_parser("send", help="send a message (body from stdin unless --body)")
    p.add_argument("--to", required=True, metavar="ALIAS")
    p.add_argument("--subject", required=True)
    p.add_argument("--body", help="message body (otherwise read from stdin)")
    p.add_argument("--attach", metavar="FILE", help="attach one file")
    p.set_defaults(fn=cmd_send)

    p = sub.add_parser("sync", help="fetch new mail and retry queued uploads")
    p.set_defaults(fn=cmd_sync)

    p = sub.add_parser("list", help="list stored messages")
    p.set_defaults(fn=cmd_list)

    p = sub.add_parser("read", help="display one message")
    p.add_argument("id", help="header id (unique prefix accepted)")
    p.add_argument("--save-attachment", metavar="FILE")
    p.set_defaults(fn=cmd_read)

    p = sub.add_parser("ack", help="acknowledge receipt; purges the server copy")
    p.add_argument("id", help="header id (unique prefix accepted)")
    p.set_defaults(fn=cmd_ack)

    p = sub.add_parser("rotate", help="offer a fresh key to one contact")
    p.add_argument("alias")
    p.set_defaults(fn=cmd_rotate)

    p = sub.add_parser("plan", help="capacity arithmetic for a deployment size")
    p.add_argument("--users", type=int, default=1000)
    p.add_argument("--rate", type=int, default=10, help="messages per user per day")
    p.add_argument(
        "--header-size",
        type=int,
        default=None,
        help="header ciphertext size (default: this build's actual size)",
    )
    p.add_argument("--syncs", type=int, default=1, help="syncs per user per day")
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("daemon", help="serve the local API and web UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9621)
    p.set_defaults(fn=cmd_daemon)

    p = sub.add_parser("serve", help="run an inbox server")
    p.add_argument("--host", dest="host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--data-dir", dest="server_data_dir", default=None)
    p.add_argument("--config-file", default=None, help="server config JSON")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, but 2 means "network" here
        return EXIT_OK if exc.code == 0 else EXIT_USER
    try:
        cli = _Cli(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    try:
        return args.fn(cli, args)
    except _USER_ERRORS as exc:
        cli.fail(exc.__class__.__name__, str(exc) or exc.__class__.__name__)
        return EXIT_USER
    except (NetworkFailure, ServerRejected) as exc:
        cli.fail(exc.__class__.__name__, str(exc))
        return EXIT_NETWORK
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except OSError as exc:
        cli.fail("OSError", str(exc))
        return EXIT_USER
    except Exception as exc:  # noqa: BLE001 — the contract wants a clean exit code
        cli.fail(exc.__class__.__name__, f"internal error: {exc}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
