"""Built-in RPC modules: system, echo, group, acl and session.

``system.auth`` / ``system.auth2`` / ``system.listMethods`` /
``system.methodSignature`` bypass ACLs so that authentication and discovery
are callable before a session exists; everything else is ACL-checked.
"""

from __future__ import annotations

import importlib
import xmlrpc.client

from .acl import AccessControlList, AclOrder
from .errors import BadCookieProtocol, BadPrefix, NotAuthorized, ProtocolError
from .rpc import (
    FAULT_HANDLER,
    FAULT_NO_SUCH_METHOD,
    MethodDescriptor,
    ModuleRegistry,
    RequestContext,
)
from .vo import ADMINS_GROUP

# Method prefixes that get a default admins-only ACL seeded at startup when
# the operator has not configured one, so remote administration is reachable
# without hand-editing the store.
ADMIN_METHOD_PREFIXES = ("group", "acl", "session")


def _args(args: list, count: int, method: str) -> list:
    if len(args) != count:
        raise ProtocolError(f"{method} expects {count} argument(s), got {len(args)}")
    return args


# --- system ---

def _system_auth(ctx: RequestContext, args: list):
    if args:
        raise ProtocolError("system.auth takes no RPC arguments")
    if not ctx.basic_auth:
        raise BadCookieProtocol(
            "system.auth requires HTTP Basic credentials (id, certificate PEM)")
    client_id, cert_pem = ctx.basic_auth
    return list(ctx.auth.handshake_basic(cert_pem, client_id))


def _system_auth2(ctx: RequestContext, args: list):
    if args:
        raise ProtocolError("system.auth2 takes no arguments")
    server_pem, server_id = ctx.auth.handshake_tls(ctx.peer_cert, ctx.cookies)
    return [server_pem, server_id]


def _system_list_methods(ctx: RequestContext, args: list):
    return ctx.registry.list_methods()


def _system_method_signature(ctx: RequestContext, args: list):
    (name,) = _args(args, 1, "system.methodSignature")
    try:
        return list(ctx.registry.resolve(name).signatures)
    except Exception:
        raise xmlrpc.client.Fault(FAULT_NO_SUCH_METHOD, f"no such method: {name}")


# --- echo ---

def _echo(ctx: RequestContext, args: list):
    """Returns the method argument."""
    (value,) = _args(args, 1, "echo.echo")
    return value


# --- group administration ---

def _group_create(ctx: RequestContext, args: list):
    if len(args) == 1:
        path, members, administrators = args[0], [], []
    else:
        path, members, administrators = _args(args, 3, "group.create")
    ctx.vo.create_group(ctx.effective_dn, path, members, administrators)
    return True


def _group_delete(ctx: RequestContext, args: list):
    (path,) = _args(args, 1, "group.delete")
    ctx.vo.delete_group(ctx.effective_dn, path)
    return True


def _group_add_member(ctx: RequestContext, args: list):
    path, dn = _args(args, 2, "group.addMember")
    ctx.vo.add_member(ctx.effective_dn, path, dn)
    return True


def _group_remove_member(ctx: RequestContext, args: list):
    path, dn = _args(args, 2, "group.removeMember")
    ctx.vo.remove_member(ctx.effective_dn, path, dn)
    return True


def _group_list(ctx: RequestContext, args: list):
    if not args:
        return ctx.vo.list_groups()
    (path,) = _args(args, 1, "group.list")
    group = ctx.vo.get_group(path)
    return {"members": group.member_list(),
            "administrators": group.administrator_list()}


# --- ACL administration (targets are "method:<prefix>" or "user:<name>") ---

def _split_target(target: str) -> tuple[str, str]:
    kind, sep, name = target.partition(":")
    if not sep or kind not in ("method", "user") or not name:
        raise ProtocolError(f"bad ACL target {target!r}; use method:<prefix> or user:<name>")
    return kind, name


def _acl_from_struct(struct: dict) -> AccessControlList:
    return AccessControlList(
        order=AclOrder(struct.get("order", "deny,allow")),
        allow_dns=struct.get("allow_dns", []),
        allow_groups=struct.get("allow_groups", []),
        deny_dns=struct.get("deny_dns", []),
        deny_groups=struct.get("deny_groups", []),
    )


def _acl_to_struct(acl: AccessControlList) -> dict:
    return {
        "order": acl.order.value,
        "allow_dns": sorted(d.decode() for d in acl.allow_dns),
        "allow_groups": list(acl.allow_groups),
        "deny_dns": sorted(d.decode() for d in acl.deny_dns),
        "deny_groups": list(acl.deny_groups),
    }


def _require_admin(ctx: RequestContext) -> None:
    if not ctx.vo.is_admins_member(ctx.effective_dn):
        raise NotAuthorized("ACL administration requires admins membership")


def _acl_set(ctx: RequestContext, args: list):
    target, struct = _args(args, 2, "acl.set")
    _require_admin(ctx)
    kind, name = _split_target(target)
    acl = _acl_from_struct(struct)
    if kind == "method":
        ctx.acls.set_method_acl(name, acl)
    else:
        ctx.acls.set_user_mapping(name, acl)
    return True


def _acl_get(ctx: RequestContext, args: list):
    (target,) = _args(args, 1, "acl.get")
    kind, name = _split_target(target)
    acl = (ctx.acls.get_method_acl(name) if kind == "method"
           else ctx.acls.get_user_mapping(name))
    if acl is None:
        raise xmlrpc.client.Fault(FAULT_HANDLER, f"no ACL for {target}")
    return _acl_to_struct(acl)


def _acl_map(ctx: RequestContext, args: list):
    (dn,) = _args(args, 1, "acl.map")
    return ctx.acls.map_user(dn, ctx.vo) or ""


# --- session administration ---

def _session_list(ctx: RequestContext, args: list):
    return [{
        "client_id": s.client_id,
        "dn": s.dn,
        "created_at": s.created_at.isoformat(),
        "expires_at": s.expires_at.isoformat(),
        "origin": s.origin,
    } for s in ctx.auth.sessions.list_sessions()]


def _session_revoke(ctx: RequestContext, args: list):
    (client_id,) = _args(args, 1, "session.revoke")
    ctx.auth.sessions.revoke(client_id)
    return True


def build_default_registry() -> ModuleRegistry:
    registry = ModuleRegistry()
    registry.register_module("system", [
        MethodDescriptor("auth", _system_auth, ["array"]),
        MethodDescriptor("auth2", _system_auth2, ["array"]),
        MethodDescriptor("listMethods", _system_list_methods, ["array"]),
        MethodDescriptor("methodSignature", _system_method_signature,
                         ["array,string"]),
    ])
    registry.register_module("echo", [
        MethodDescriptor("echo", _echo, ["string,string"],
                         help="Returns the method argument"),
    ])
    registry.register_module("group", [
        MethodDescriptor("create", _group_create, ["boolean,string,array,array"],
                         exclusive=True),
        MethodDescriptor("delete", _group_delete, ["boolean,string"],
                         exclusive=True),
        MethodDescriptor("addMember", _group_add_member,
                         ["boolean,string,string"], exclusive=True),
        MethodDescriptor("removeMember", _group_remove_member,
                         ["boolean,string,string"], exclusive=True),
        MethodDescriptor("list", _group_list, ["array", "struct,string"]),
    ])
    registry.register_module("acl", [
        MethodDescriptor("set", _acl_set, ["boolean,string,struct"],
                         exclusive=True),
        MethodDescriptor("get", _acl_get, ["struct,string"]),
        MethodDescriptor("map", _acl_map, ["string,string"]),
    ])
    registry.register_module("session", [
        MethodDescriptor("list", _session_list, ["array"]),
        MethodDescriptor("revoke", _session_revoke, ["boolean,string"],
                         exclusive=True),
    ])
    return registry


def load_manifest_modules(registry: ModuleRegistry,
                          manifest: dict[str, str]) -> None:
    """Register configured plugins: prefix -> "package.module:factory".

    The factory is called with no arguments and must return a list of
    MethodDescriptor.  User-scoped modules use "~user.module" prefixes.
    """
    for prefix, spec in sorted(manifest.items()):
        module_name, sep, attr = spec.partition(":")
        if not sep:
            raise BadPrefix(f"manifest entry {prefix}={spec!r} needs module:factory")
        factory = getattr(importlib.import_module(module_name), attr)
        registry.register_module(prefix, list(factory()))


def seed_admin_acls(acl_store, vo) -> None:
    """Give the admins group access to the administration modules unless the
    operator already configured those prefixes."""
    for prefix in ADMIN_METHOD_PREFIXES:
        if acl_store.get_method_acl(prefix) is None:
            acl_store.set_method_acl(prefix, AccessControlList(
                order=AclOrder.DENY_THEN_ALLOW,
                allow_groups=[ADMINS_GROUP],
            ))
