"""HTTP front door: RPC POSTs, file GETs, credential extraction, audit log.

URLs under ``rpc_url_prefix`` (default ``/clarens/``) are RPC calls; every
other URL is plain file space served from ``file_root``.  RPC responses and
faults both travel as HTTP 200 with an XML-RPC body; transport problems use
HTTP status codes.  GET errors are XML documents
``<error><code/><message/></error>``.

Each completed request appends exactly one tab-separated audit line:

    timestamp  peer  dn  method-or-path  verdict  duration_ms

with verdict "ok", "denied" (ACL denial) or "fault:N" (other failures and
non-200 file responses).
"""

from __future__ import annotations

import mimetypes
import os
import posixpath
import ssl
import threading
import time
import urllib.parse
import xmlrpc.client
from base64 import b64decode
from datetime import datetime, timezone
from http.cookies import SimpleCookie
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from xml.sax.saxutils import escape

from .acl import AclStore
from .auth import AuthService, CertificateBundle, SessionManager
from .builtins import build_default_registry, load_manifest_modules, seed_admin_acls
from .config import ConfigError, GatewayConfig
from .errors import ParseError, ProtocolError, RpcError
from .rpc import (
    FAULT_NOT_AUTHORIZED,
    RequestContext,
    decode_call,
    encode_fault,
    encode_response,
)
from .store import FileKvStore, KvStore, MemoryKvStore
from .vo import VoRegistry


def _xml_error(code: int, message: str) -> bytes:
    return (f"<error><code>{code}</code><message>{escape(message)}</message></error>"
            ).encode("utf-8")


class Auditor:
    """Serialized append-only audit writer; write failures never fail requests."""

    def __init__(self, path: Optional[str]):
        self._lock = threading.Lock()
        self._fh = open(path, "a", encoding="utf-8") if path else None
        self.write_failures = 0

    def write(self, peer: str, dn: Optional[str], what: str,
              verdict: str, duration_ms: float) -> None:
        stamp = datetime.now(timezone.utc).isoformat(timespec="milliseconds")
        line = "\t".join([
            stamp, peer, dn or "-", what, verdict, f"{duration_ms:.3f}",
        ]) + "\n"
        try:
            with self._lock:
                if self._fh is not None:
                    self._fh.write(line)
                    self._fh.flush()
        except OSError:
            self.write_failures += 1

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


class Gateway:
    """Wires the store, VO, ACLs, auth and RPC registry behind one listener."""

    def __init__(self, config: GatewayConfig, store: Optional[KvStore] = None):
        self.config = config
        if store is not None:
            self.store = store
        elif config.store_path:
            self.store = FileKvStore(config.store_path)
        else:
            self.store = MemoryKvStore()
        self.vo = VoRegistry.bootstrap(list(config.admin_dns), self.store)
        self.acls = AclStore.load(self.store)
        seed_admin_acls(self.acls, self.vo)
        self.sessions = SessionManager(self.store, ttl_seconds=config.session_ttl)
        if not config.cert_path or not config.key_path or not config.ca_path:
            raise ConfigError("cert, key and ca paths are required")
        with open(config.cert_path) as fh:
            server_cert_pem = fh.read()
        with open(config.key_path, "rb") as fh:
            server_key_pem = fh.read()
        with open(config.ca_path) as fh:
            ca_pem = fh.read()
        self.auth = AuthService(server_cert_pem, server_key_pem, [ca_pem],
                                self.sessions)
        self.registry = build_default_registry()
        load_manifest_modules(self.registry, config.module_manifest)
        self.audit = Auditor(config.audit_log)
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    # --- lifecycle ---

    def _make_httpd(self) -> ThreadingHTTPServer:
        httpd = ThreadingHTTPServer(
            (self.config.listen_host, self.config.listen_port), GatewayHandler)
        httpd.daemon_threads = True
        httpd.gateway = self
        if self.config.tls_enabled:
            ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            ctx.load_cert_chain(self.config.cert_path, self.config.key_path)
            ctx.load_verify_locations(self.config.ca_path)
            ctx.verify_mode = ssl.CERT_OPTIONAL
            httpd.socket = ctx.wrap_socket(httpd.socket, server_side=True)
        return httpd

    def start(self) -> None:
        self._httpd = self._make_httpd()
        self._thread = threading.Thread(target=self._httpd.serve_forever,
                                        daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self._httpd = self._make_httpd()
        self._httpd.serve_forever()

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
        self.audit.close()
        self.store.close()

    # --- request handling (called from the handler threads) ---

    def run_rpc(self, body: bytes, ctx: RequestContext) -> tuple[bytes, str, Optional[str]]:
        """Returns (response body, audit verdict, method name or None)."""
        try:
            method_name, args = decode_call(body)
        except ParseError as exc:
            return encode_fault(exc.fault_code, exc.message), "fault:1", None
        except ProtocolError as exc:
            return encode_fault(exc.fault_code, exc.message), "fault:5", None
        result = self.registry.dispatch(self.acls, self.vo, ctx.session,
                                        method_name, args, ctx)
        if isinstance(result, xmlrpc.client.Fault):
            verdict = ("denied" if result.faultCode == FAULT_NOT_AUTHORIZED
                       else f"fault:{result.faultCode}")
            return encode_fault(result.faultCode, result.faultString), verdict, method_name
        try:
            return encode_response(result), "ok", method_name
        except Exception as exc:
            body = encode_fault(RpcError.fault_code, f"unencodable result: {exc}")
            return body, f"fault:{RpcError.fault_code}", method_name


class GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "clarens"

    def log_message(self, format, *args):  # request logging goes to the audit log
        pass

    @property
    def gateway(self) -> Gateway:
        return self.server.gateway

    # --- helpers ---

    def _peer(self) -> str:
        return f"{self.client_address[0]}:{self.client_address[1]}"

    def _cookies(self) -> dict[str, str]:
        jar = SimpleCookie(self.headers.get("Cookie", ""))
        return {k: v.value for k, v in jar.items()}

    def _basic_auth(self) -> Optional[tuple[str, str]]:
        header = self.headers.get("Authorization", "")
        if not header.startswith("Basic "):
            return None
        try:
            decoded = b64decode(header[6:].strip()).decode("utf-8")
        except Exception:
            return None
        username, sep, password = decoded.partition(":")
        return (username, password) if sep else None

    def _peer_cert(self) -> Optional[CertificateBundle]:
        conn = self.connection
        if not isinstance(conn, ssl.SSLSocket):
            return None
        der = conn.getpeercert(binary_form=True)
        if not der:
            return None
        try:
            return CertificateBundle.from_pem(der)
        except Exception:
            return None

    def _send(self, status: int, body: bytes,
              content_type: str = "text/xml") -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_body(self) -> Optional[bytes]:
        length = int(self.headers.get("Content-Length", 0) or 0)
        if length > self.gateway.config.max_body:
            return None
        return self.rfile.read(length)

    def _build_context(self) -> RequestContext:
        gw = self.gateway
        ctx = RequestContext(cookies=self._cookies(),
                             basic_auth=self._basic_auth(),
                             peer_cert=self._peer_cert(),
                             auth=gw.auth)
        client_id = server_id = None
        if ctx.cookies.get("clarens_username") and ctx.cookies.get("clarens_password"):
            client_id = ctx.cookies["clarens_username"]
            server_id = ctx.cookies["clarens_password"]
        elif ctx.basic_auth:
            client_id, server_id = ctx.basic_auth
        if client_id and server_id:
            session = gw.auth.validate_session(client_id, server_id)
            if session is not None:
                ctx.session = session
                ctx.dn = session.dn
        return ctx

    # --- verbs ---

    def do_POST(self):
        gw = self.gateway
        start = time.perf_counter()
        path = urllib.parse.urlsplit(self.path).path
        if not path.startswith(gw.config.rpc_url_prefix):
            # Other URLs are plain file space, POST or not.
            self._serve_file(start)
            return
        peer = self._peer()
        if gw.config.tls_required and not isinstance(self.connection, ssl.SSLSocket):
            body = _xml_error(403, "TLS required")
            self._send(403, body)
            gw.audit.write(peer, None, "POST " + path, "fault:403",
                           (time.perf_counter() - start) * 1000)
            return
        ctype = self.headers.get("Content-Type", "")
        if "xml" not in ctype.lower():
            self._send(400, _xml_error(400, f"unsupported content type {ctype!r}"))
            gw.audit.write(peer, None, "POST " + path, "fault:400",
                           (time.perf_counter() - start) * 1000)
            return
        body = self._read_body()
        if body is None:
            self._send(413, _xml_error(413, "request body too large"))
            gw.audit.write(peer, None, "POST " + path, "fault:413",
                           (time.perf_counter() - start) * 1000)
            return
        ctx = self._build_context()
        response, verdict, method = gw.run_rpc(body, ctx)
        self._send(200, response)
        gw.audit.write(peer, ctx.dn, method or "POST " + path, verdict,
                       (time.perf_counter() - start) * 1000)

    def do_GET(self):
        self._serve_file(time.perf_counter())

    def _serve_file(self, start: float) -> None:
        gw = self.gateway
        peer = self._peer()
        path = urllib.parse.unquote(urllib.parse.urlsplit(self.path).path)
        ctx = self._build_context()

        def finish(status: int, body: bytes, ctype: str) -> None:
            self._send(status, body, ctype)
            verdict = "ok" if status == 200 else f"fault:{status}"
            gw.audit.write(peer, ctx.dn, f"GET {path}", verdict,
                           (time.perf_counter() - start) * 1000)

        root = gw.config.file_root
        if root is None:
            finish(404, _xml_error(404, "no file space configured"), "text/xml")
            return
        # Normalize and refuse anything escaping the file root.
        clean = posixpath.normpath(path.lstrip("/"))
        if clean.startswith("..") or os.path.isabs(clean):
            finish(403, _xml_error(403, "path escapes file root"), "text/xml")
            return
        target = os.path.realpath(os.path.join(root, clean))
        root_real = os.path.realpath(root)
        if not (target == root_real or target.startswith(root_real + os.sep)):
            finish(403, _xml_error(403, "path escapes file root"), "text/xml")
            return
        if not os.path.isfile(target):
            finish(404, _xml_error(404, f"no such file: {path}"), "text/xml")
            return
        ctype = mimetypes.guess_type(target)[0] or "application/octet-stream"
        with open(target, "rb") as fh:
            finish(200, fh.read(), ctype)
