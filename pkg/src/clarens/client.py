"""XML-RPC client speaking the gateway's wire protocol.

Performs the system.auth Basic-auth exchange: sends its id and certificate
PEM as the Basic credentials, decrypts the returned server session id with
its private key, verifies the signed client id against the returned server
certificate, and verifies that certificate against the trusted CA.  Used by
the admin CLI's remote mode and by the integration tests.
"""

from __future__ import annotations

import base64
import http.client
import secrets
import ssl
import urllib.parse
import xmlrpc.client
from typing import Any, Optional

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding

from .auth import load_certificate, verify_chain, _OAEP
from .errors import ChainVerifyFailed, ProtocolError


class ClientFault(Exception):
    """Server-side fault with its wire code (1-5)."""

    def __init__(self, code: int, message: str):
        super().__init__(f"fault {code}: {message}")
        self.code = code
        self.message = message


class FaultParse(ClientFault):
    pass


class FaultNoSuchMethod(ClientFault):
    pass


class FaultNotAuthorized(ClientFault):
    pass


class FaultHandler(ClientFault):
    pass


class FaultProtocol(ClientFault):
    pass


_FAULT_TYPES = {1: FaultParse, 2: FaultNoSuchMethod, 3: FaultNotAuthorized,
                4: FaultHandler, 5: FaultProtocol}


def make_fault(code: int, message: str) -> ClientFault:
    return _FAULT_TYPES.get(code, ClientFault)(code, message)


class ClarensClient:
    def __init__(self, url: str, cert_path: Optional[str] = None,
                 key_path: Optional[str] = None, ca_path: Optional[str] = None,
                 rpc_path: Optional[str] = None):
        parts = urllib.parse.urlsplit(url)
        if parts.scheme not in ("http", "https"):
            raise ValueError(f"unsupported URL scheme {parts.scheme!r}")
        self._scheme = parts.scheme
        self._host = parts.hostname or "localhost"
        self._port = parts.port or (443 if parts.scheme == "https" else 80)
        self._path = rpc_path or (parts.path if parts.path.strip("/") else "/clarens/")
        self._ca_path = ca_path
        self._cert_pem = self._key = None
        if cert_path:
            with open(cert_path) as fh:
                self._cert_pem = fh.read()
        if key_path:
            with open(key_path, "rb") as fh:
                self._key = serialization.load_pem_private_key(fh.read(),
                                                               password=None)
        self.client_id: Optional[str] = None
        self.server_id: Optional[str] = None
        self.server_cert_pem: Optional[str] = None

    # --- transport ---

    def _request(self, body: bytes, auth: Optional[tuple[str, str]]) -> bytes:
        if self._scheme == "https":
            ctx = ssl.create_default_context(cafile=self._ca_path)
            conn = http.client.HTTPSConnection(self._host, self._port,
                                               context=ctx, timeout=30)
        else:
            conn = http.client.HTTPConnection(self._host, self._port, timeout=30)
        headers = {"Content-Type": "text/xml"}
        if auth:
            token = base64.b64encode(f"{auth[0]}:{auth[1]}".encode()).decode()
            headers["Authorization"] = f"Basic {token}"
        try:
            conn.request("POST", self._path, body, headers)
            response = conn.getresponse()
            data = response.read()
            if response.status != 200:
                raise ProtocolError(f"HTTP {response.status}: {data[:200]!r}")
            return data
        finally:
            conn.close()

    def _call_raw(self, method: str, args: list,
                  auth: Optional[tuple[str, str]]) -> Any:
        body = xmlrpc.client.dumps(tuple(args), methodname=method).encode()
        data = self._request(body, auth)
        try:
            (value,), _ = xmlrpc.client.loads(data, use_builtin_types=True)
        except xmlrpc.client.Fault as fault:
            raise make_fault(fault.faultCode, fault.faultString) from None
        return value

    # --- protocol ---

    def connect(self) -> "ClarensClient":
        """system.auth handshake with mutual-possession checks."""
        if not self._cert_pem or self._key is None:
            raise ValueError("connect() needs a client certificate and key")
        self.client_id = secrets.token_hex(16)
        reply = self._call_raw("system.auth", [],
                               (self.client_id, self._cert_pem))
        if not isinstance(reply, list) or len(reply) != 3:
            raise ProtocolError(f"system.auth returned {reply!r}")
        server_pem, enc_server_id, signed_client_id = reply
        self.server_id = self._key.decrypt(
            base64.b64decode(enc_server_id), _OAEP).decode("utf-8")
        server_cert = load_certificate(server_pem)
        server_cert.public_key().verify(
            base64.b64decode(signed_client_id),
            self.client_id.encode("utf-8"),
            padding.PKCS1v15(), hashes.SHA256())
        if self._ca_path:
            with open(self._ca_path) as fh:
                verify_chain(server_pem, [fh.read()])
        self.server_cert_pem = server_pem
        return self

    def call(self, method: str, args: list) -> Any:
        if self.server_id is None:
            raise ChainVerifyFailed("not connected; call connect() first")
        return self._call_raw(method, args, (self.client_id, self.server_id))
