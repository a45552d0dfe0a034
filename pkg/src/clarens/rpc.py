"""XML-RPC codec, method registry and dispatch.

Values are plain python types: int, bool, str, float, datetime, bytes, list
and dict (string keys).  The wire format is standard XML-RPC via the stdlib
codec; the <nil> extension is rejected to stay within the base protocol.

Fault codes (stable, documented API):
    1 parse error        4 handler error
    2 no such method     5 protocol error
    3 not authorized
"""

from __future__ import annotations

import re
import threading
import xmlrpc.client
from dataclasses import dataclass, field
from typing import Any, Callable, Optional
from xml.etree import ElementTree
from xml.parsers import expat

from .acl import AclStore, Verdict
from .auth import AuthService, CertificateBundle, Session
from .dn import ANONYMOUS_DN
from .errors import (
    BadPrefix,
    ClarensError,
    DuplicateMethod,
    NoSuchMethod,
    NotAuthorized,
    ParseError,
    ProtocolError,
    RpcError,
)
from .vo import VoRegistry

FAULT_PARSE = 1
FAULT_NO_SUCH_METHOD = 2
FAULT_NOT_AUTHORIZED = 3
FAULT_HANDLER = 4
FAULT_PROTOCOL = 5

# Methods callable before (and without) authentication.
ACL_BYPASS_METHODS = frozenset({
    "system.auth", "system.auth2", "system.listMethods", "system.methodSignature",
})

_PREFIX_RE = re.compile(r"^~?[A-Za-z0-9_][A-Za-z0-9_-]*(\.[A-Za-z0-9_][A-Za-z0-9_-]*)*$")
_SOAP_NS = "http://schemas.xmlsoap.org/soap/envelope/"


# --- codec ---

def _reject_none(value: Any) -> None:
    if value is None:
        raise ProtocolError("<nil> values are not supported")
    if isinstance(value, list):
        for item in value:
            _reject_none(item)
    elif isinstance(value, dict):
        for item in value.values():
            _reject_none(item)


def decode_call(body: bytes) -> tuple[str, list]:
    """Parse an XML-RPC methodCall; returns (method name, argument list)."""
    try:
        root = ElementTree.fromstring(body)
    except ElementTree.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc
    tag = root.tag
    if tag == f"{{{_SOAP_NS}}}Envelope" or tag.endswith("}Envelope"):
        raise ProtocolError("SOAP not supported")
    if tag != "methodCall":
        raise ProtocolError(f"expected methodCall, got {tag}")
    try:
        args, method_name = xmlrpc.client.loads(
            body, use_builtin_types=True)
    except (expat.ExpatError, xmlrpc.client.ResponseError) as exc:
        raise ProtocolError(f"invalid methodCall: {exc}") from exc
    except Exception as exc:
        raise ProtocolError(f"invalid methodCall: {exc}") from exc
    if method_name is None:
        raise ProtocolError("missing methodName")
    args = list(args)
    _reject_none(args)
    return method_name, args


def encode_response(value: Any) -> bytes:
    return xmlrpc.client.dumps(
        (value,), methodresponse=True, allow_none=False).encode("utf-8")


def encode_fault(code: int, message: str) -> bytes:
    return xmlrpc.client.dumps(
        xmlrpc.client.Fault(code, message), methodresponse=True).encode("utf-8")


# --- registry ---

@dataclass
class MethodDescriptor:
    name: str                                   # short name within its module
    handler: Callable[["RequestContext", list], Any]
    signatures: list[str]                       # return type first, e.g. "string,string"
    exclusive: bool = False                     # serialized against other exclusives
    help: str = ""


@dataclass
class RequestContext:
    """Everything a handler may need about the current request."""
    dn: Optional[str] = None
    session: Optional[Session] = None
    peer_cert: Optional[CertificateBundle] = None
    cookies: dict[str, str] = field(default_factory=dict)
    basic_auth: Optional[tuple[str, str]] = None
    vo: Optional[VoRegistry] = None
    acls: Optional[AclStore] = None
    auth: Optional[AuthService] = None
    registry: Optional["ModuleRegistry"] = None

    @property
    def effective_dn(self) -> str:
        return self.dn or ANONYMOUS_DN


class ModuleRegistry:
    """Startup-time plugin registry mapping module prefixes to methods.

    Modules register once at startup (from the config manifest or built-ins)
    and the registry is immutable afterwards, so dispatch needs no locking.
    """

    def __init__(self):
        self.modules: dict[str, list[MethodDescriptor]] = {}
        self._methods: dict[str, MethodDescriptor] = {}
        self._exclusive_lock = threading.Lock()

    def register_module(self, prefix: str,
                        descriptors: list[MethodDescriptor]) -> None:
        if not _PREFIX_RE.match(prefix or ""):
            raise BadPrefix(repr(prefix))
        for desc in descriptors:
            full = f"{prefix}.{desc.name}"
            if full in self._methods:
                raise DuplicateMethod(full)
            if not desc.signatures:
                raise BadPrefix(f"{full} has no signatures")
        self.modules.setdefault(prefix, []).extend(descriptors)
        for desc in descriptors:
            self._methods[f"{prefix}.{desc.name}"] = desc

    def resolve(self, full_name: str) -> MethodDescriptor:
        try:
            return self._methods[full_name]
        except KeyError:
            raise NoSuchMethod(full_name) from None

    def list_methods(self) -> list[str]:
        return sorted(self._methods)

    # --- dispatch ---

    def dispatch(self, acl_store: AclStore, vo: VoRegistry,
                 session: Optional[Session], method_name: str,
                 args: list, ctx: Optional[RequestContext] = None):
        """Returns the handler value, or xmlrpc.client.Fault on any error."""
        ctx = ctx or RequestContext()
        ctx.session = session
        ctx.dn = session.dn if session else ctx.dn
        ctx.vo = vo
        ctx.acls = acl_store
        ctx.registry = self
        try:
            descriptor = self.resolve(method_name)
        except NoSuchMethod as exc:
            return xmlrpc.client.Fault(FAULT_NO_SUCH_METHOD,
                                       f"no such method: {exc.message}")
        if method_name not in ACL_BYPASS_METHODS:
            decision = acl_store.check_method_access(
                method_name, ctx.effective_dn, vo)
            if decision.verdict is not Verdict.ALLOW:
                return xmlrpc.client.Fault(
                    FAULT_NOT_AUTHORIZED,
                    f"access to {method_name} denied"
                    + (f" at {decision.decided_at}" if decision.decided_at else ""))
        try:
            if descriptor.exclusive:
                with self._exclusive_lock:
                    return descriptor.handler(ctx, args)
            return descriptor.handler(ctx, args)
        except xmlrpc.client.Fault as fault:
            return fault
        except NotAuthorized as exc:
            return xmlrpc.client.Fault(FAULT_NOT_AUTHORIZED, str(exc))
        except RpcError as exc:
            return xmlrpc.client.Fault(exc.fault_code, exc.message)
        except ClarensError as exc:
            return xmlrpc.client.Fault(
                FAULT_HANDLER, f"{type(exc).__name__}: {exc}")
        except Exception as exc:
            return xmlrpc.client.Fault(
                FAULT_HANDLER, f"{type(exc).__name__}: {exc}")
