"""Operator command line: VO groups, ACLs, user mappings, sessions, store.

Two modes share one command surface:

* local — operate directly on the store named by --config/--store; mutating
  commands act as --actor (default: the first configured admin DN).
* remote — with --url (plus --cert/--key/--ca), speak XML-RPC to a running
  gateway exactly like any other client.

Every command exits 0 on success and nonzero with a one-line
"error: <Type>: <message>" on stderr otherwise.  --json switches output to
structured JSON.
"""

from __future__ import annotations

import argparse
import json
import sys

from .acl import AccessControlList, AclOrder, AclStore
from .client import ClarensClient, ClientFault
from .config import ConfigError, GatewayConfig
from .errors import ClarensError
from .store import FileKvStore
from .vo import VoRegistry


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clarens-admin",
        description="Administer a clarens gateway (local store or remote server).")
    parser.add_argument("--config", help="server config file (local mode)")
    parser.add_argument("--store", help="store path override (local mode)")
    parser.add_argument("--actor", help="acting DN for local mutations")
    parser.add_argument("--url", help="server URL (remote mode)")
    parser.add_argument("--cert", help="client certificate PEM (remote mode)")
    parser.add_argument("--key", help="client private key PEM (remote mode)")
    parser.add_argument("--ca", help="trusted CA PEM (remote mode)")
    parser.add_argument("--json", action="store_true", dest="as_json",
                        help="structured JSON output")
    sub = parser.add_subparsers(dest="command", required=True)

    group = sub.add_parser("group").add_subparsers(dest="action", required=True)
    p = group.add_parser("create")
    p.add_argument("path")
    p.add_argument("--member", action="append", default=[])
    p.add_argument("--admin", action="append", default=[])
    group.add_parser("delete").add_argument("path")
    p = group.add_parser("add-member")
    p.add_argument("path")
    p.add_argument("dn")
    p = group.add_parser("remove-member")
    p.add_argument("path")
    p.add_argument("dn")
    group.add_parser("list").add_argument("path", nargs="?")

    acl = sub.add_parser("acl").add_subparsers(dest="action", required=True)
    p = acl.add_parser("set")
    p.add_argument("prefix", help="dotted method prefix")
    _acl_rule_args(p)
    acl.add_parser("get").add_argument("prefix")

    usermap = sub.add_parser("usermap").add_subparsers(dest="action", required=True)
    p = usermap.add_parser("set")
    p.add_argument("username")
    _acl_rule_args(p, deny=False)
    usermap.add_parser("resolve").add_argument("dn")

    session = sub.add_parser("session").add_subparsers(dest="action", required=True)
    session.add_parser("list")
    session.add_parser("revoke").add_argument("client_id")

    store = sub.add_parser("store").add_subparsers(dest="action", required=True)
    p = store.add_parser("export")
    p.add_argument("--out", help="output file (default stdout)")
    store.add_parser("import").add_argument("file")

    serve = sub.add_parser("serve")
    serve.add_argument("--listen", help="host:port override")
    serve.add_argument("--no-tls", action="store_true")
    return parser


def _acl_rule_args(p: argparse.ArgumentParser, deny: bool = True) -> None:
    p.add_argument("--order", choices=[o.value for o in AclOrder],
                   default=AclOrder.DENY_THEN_ALLOW.value)
    p.add_argument("--allow-dn", action="append", default=[])
    p.add_argument("--allow-group", action="append", default=[])
    if deny:
        p.add_argument("--deny-dn", action="append", default=[])
        p.add_argument("--deny-group", action="append", default=[])
    p.add_argument("--from-json", help="read the full ACL from a JSON file")


def _acl_from_args(args) -> AccessControlList:
    if getattr(args, "from_json", None):
        with open(args.from_json) as fh:
            data = json.load(fh)
        return AccessControlList(
            order=AclOrder(data.get("order", "deny,allow")),
            allow_dns=data.get("allow_dns", []),
            allow_groups=data.get("allow_groups", []),
            deny_dns=data.get("deny_dns", []),
            deny_groups=data.get("deny_groups", []))
    return AccessControlList(
        order=AclOrder(args.order),
        allow_dns=args.allow_dn,
        allow_groups=args.allow_group,
        deny_dns=getattr(args, "deny_dn", []),
        deny_groups=getattr(args, "deny_group", []))


def _acl_struct(acl: AccessControlList) -> dict:
    return {
        "order": acl.order.value,
        "allow_dns": sorted(d.decode() for d in acl.allow_dns),
        "allow_groups": list(acl.allow_groups),
        "deny_dns": sorted(d.decode() for d in acl.deny_dns),
        "deny_groups": list(acl.deny_groups),
    }


class _Local:
    def __init__(self, args):
        self.config = GatewayConfig.load(args.config) if args.config else None
        store_path = args.store or (self.config.store_path if self.config else None)
        if store_path is None:
            raise ClarensError("local mode needs --config or --store")
        self.store = FileKvStore(store_path)
        admin_dns = self.config.admin_dns if self.config else []
        if admin_dns:
            self.vo = VoRegistry.bootstrap(admin_dns, self.store)
        else:
            self.vo = VoRegistry.load(self.store)
        self.acls = AclStore.load(self.store)
        self.actor = args.actor or (admin_dns[0] if admin_dns else "/anonymous")

    def close(self):
        self.store.close()


def _emit(args, human: str, data) -> None:
    if args.as_json:
        print(json.dumps(data, indent=2, sort_keys=True))
    elif human:
        print(human)


def _run_local(args) -> None:
    env = _Local(args)
    try:
        cmd, action = args.command, getattr(args, "action", None)
        if cmd == "group":
            if action == "create":
                group = env.vo.create_group(env.actor, args.path,
                                            args.member, args.admin)
                _emit(args, f"created {args.path}", {
                    "path": args.path,
                    "members": group.member_list(),
                    "administrators": group.administrator_list()})
            elif action == "delete":
                env.vo.delete_group(env.actor, args.path)
                _emit(args, f"deleted {args.path}", {"deleted": args.path})
            elif action == "add-member":
                env.vo.add_member(env.actor, args.path, args.dn)
                _emit(args, f"added {args.dn} to {args.path}",
                      {"path": args.path,
                       "members": env.vo.get_group(args.path).member_list()})
            elif action == "remove-member":
                env.vo.remove_member(env.actor, args.path, args.dn)
                _emit(args, f"removed {args.dn} from {args.path}",
                      {"path": args.path,
                       "members": env.vo.get_group(args.path).member_list()})
            elif action == "list":
                if args.path:
                    group = env.vo.get_group(args.path)
                    data = {"members": group.member_list(),
                            "administrators": group.administrator_list()}
                    _emit(args, "\n".join(
                        [f"members: {', '.join(data['members']) or '-'}",
                         f"administrators: {', '.join(data['administrators']) or '-'}"]),
                        data)
                else:
                    paths = env.vo.list_groups()
                    _emit(args, "\n".join(paths), paths)
        elif cmd == "acl":
            if action == "set":
                acl = _acl_from_args(args)
                env.acls.set_method_acl(args.prefix, acl)
                _emit(args, f"acl set for {args.prefix}", _acl_struct(acl))
            else:
                acl = env.acls.get_method_acl(args.prefix)
                if acl is None:
                    raise ClarensError(f"no ACL for {args.prefix}")
                _emit(args, json.dumps(_acl_struct(acl)), _acl_struct(acl))
        elif cmd == "usermap":
            if action == "set":
                acl = _acl_from_args(args)
                env.acls.set_user_mapping(args.username, acl)
                _emit(args, f"mapping set for {args.username}", _acl_struct(acl))
            else:
                username = env.acls.map_user(args.dn, env.vo)
                if username is None:
                    raise ClarensError(f"no mapping for {args.dn}")
                _emit(args, username, {"username": username})
        elif cmd == "session":
            from .auth import SessionManager
            sessions = SessionManager(env.store)
            if action == "list":
                data = [{"client_id": s.client_id, "dn": s.dn,
                         "expires_at": s.expires_at.isoformat(),
                         "origin": s.origin}
                        for s in sessions.list_sessions()]
                _emit(args, "\n".join(f"{d['client_id']}\t{d['dn']}" for d in data),
                      data)
            else:
                sessions.revoke(args.client_id)
                _emit(args, f"revoked {args.client_id}",
                      {"revoked": args.client_id})
        elif cmd == "store":
            if action == "export":
                lines = list(env.store.export_records())
                if args.out:
                    with open(args.out, "w") as fh:
                        fh.write("\n".join(lines) + ("\n" if lines else ""))
                    _emit(args, f"exported {len(lines)} records to {args.out}",
                          {"records": len(lines)})
                else:
                    for line in lines:
                        print(line)
            else:
                with open(args.file) as fh:
                    count = env.store.import_records(fh)
                _emit(args, f"imported {count} records", {"records": count})
        else:
            raise ClarensError(f"unknown command {cmd}")
    finally:
        env.close()


def _run_remote(args) -> None:
    client = ClarensClient(args.url, cert_path=args.cert, key_path=args.key,
                           ca_path=args.ca)
    client.connect()
    cmd, action = args.command, getattr(args, "action", None)
    if cmd == "group":
        if action == "create":
            client.call("group.create", [args.path, args.member, args.admin])
            _emit(args, f"created {args.path}", {"path": args.path})
        elif action == "delete":
            client.call("group.delete", [args.path])
            _emit(args, f"deleted {args.path}", {"deleted": args.path})
        elif action == "add-member":
            client.call("group.addMember", [args.path, args.dn])
            _emit(args, f"added {args.dn} to {args.path}", {"path": args.path})
        elif action == "remove-member":
            client.call("group.removeMember", [args.path, args.dn])
            _emit(args, f"removed {args.dn} from {args.path}", {"path": args.path})
        else:
            result = client.call("group.list", [args.path] if args.path else [])
            _emit(args, json.dumps(result) if isinstance(result, dict)
                  else "\n".join(result), result)
    elif cmd == "acl":
        if action == "set":
            client.call("acl.set",
                        [f"method:{args.prefix}", _acl_struct(_acl_from_args(args))])
            _emit(args, f"acl set for {args.prefix}", {"prefix": args.prefix})
        else:
            result = client.call("acl.get", [f"method:{args.prefix}"])
            _emit(args, json.dumps(result), result)
    elif cmd == "usermap":
        if action == "set":
            client.call("acl.set",
                        [f"user:{args.username}", _acl_struct(_acl_from_args(args))])
            _emit(args, f"mapping set for {args.username}",
                  {"username": args.username})
        else:
            username = client.call("acl.map", [args.dn])
            if not username:
                raise ClarensError(f"no mapping for {args.dn}")
            _emit(args, username, {"username": username})
    elif cmd == "session":
        if action == "list":
            result = client.call("session.list", [])
            _emit(args, "\n".join(f"{d['client_id']}\t{d['dn']}" for d in result),
                  result)
        else:
            client.call("session.revoke", [args.client_id])
            _emit(args, f"revoked {args.client_id}", {"revoked": args.client_id})
    else:
        raise ClarensError(f"command {cmd} is local-only")


def _run_serve(args) -> None:
    from .server import Gateway
    overrides = {}
    if args.listen:
        overrides["listen"] = args.listen
    if args.no_tls:
        overrides["tls_enabled"] = "false"
        overrides["tls_required"] = "false"
    config = GatewayConfig.load(args.config, overrides=overrides)
    gateway = Gateway(config)
    print(f"listening on {config.listen} "
          f"({'tls' if config.tls_enabled else 'plain'})", flush=True)
    try:
        gateway.serve_forever()
    except KeyboardInterrupt:
        gateway.stop()


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            _run_serve(args)
        elif args.url:
            _run_remote(args)
        else:
            _run_local(args)
        return 0
    except (ClarensError, ClientFault, ConfigError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
