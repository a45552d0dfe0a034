"""Certificate authentication: chain checks, the two handshakes, sessions.

Two handshakes are offered:

* ``system.auth2`` (TLS/cookie flow): the transport supplies a verified peer
  certificate; the client picks a session id via the ``clarens_username``
  cookie and sets ``clarens_password=BROWSER``.  The reply carries the server
  certificate and the server-generated half of the session id, which the
  client echoes back as the ``clarens_password`` cookie from then on.

* ``system.auth`` (Basic-auth flow): the client sends its id and certificate
  PEM as Basic-auth username/password.  The reply is a three-element array:
  the server certificate, the server session id encrypted to the client's
  public key (RSA-OAEP/SHA-256), and the client id signed by the server's
  private key (RSA PKCS#1 v1.5 / SHA-256).  Only the holder of the client's
  private key can learn the server id, and the signature proves the server
  holds the key matching its certificate.

All binary material crossing the wire is Base64 without line breaks.
Sessions are persisted so they survive server restarts.
"""

from __future__ import annotations

import base64
import hmac
import json
import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Optional

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.x509.oid import NameOID

from .dn import DistinguishedName
from .errors import (
    BadCookieProtocol,
    ChainVerifyFailed,
    ExpiredCertificate,
    MalformedCertificate,
    NoPeerCertificate,
    OversizedClientId,
)
from .store import KvStore

COOKIE_USERNAME = "clarens_username"
COOKIE_PASSWORD = "clarens_password"
BROWSER_SENTINEL = "BROWSER"

SERVER_ID_BYTES = 32
# RSA-2048 OAEP/SHA-256 payload capacity; the client id must fit one block.
MAX_CLIENT_ID_BYTES = 190

_OID_TO_KEY = {
    NameOID.COUNTRY_NAME: "C",
    NameOID.STATE_OR_PROVINCE_NAME: "ST",
    NameOID.LOCALITY_NAME: "L",
    NameOID.ORGANIZATION_NAME: "O",
    NameOID.ORGANIZATIONAL_UNIT_NAME: "OU",
    NameOID.COMMON_NAME: "CN",
    NameOID.EMAIL_ADDRESS: "Email",
}

_OAEP = padding.OAEP(mgf=padding.MGF1(algorithm=hashes.SHA256()),
                     algorithm=hashes.SHA256(), label=None)


def subject_to_slash_dn(name: x509.Name) -> DistinguishedName:
    parts = []
    for rdn in name.rdns:
        for attr in rdn:
            key = _OID_TO_KEY.get(attr.oid)
            if key is None:
                raise MalformedCertificate(f"unsupported subject attribute {attr.oid}")
            parts.append(f"/{key}={attr.value}")
    raw = "".join(parts)
    return DistinguishedName.parse(raw)


def load_certificate(pem: str | bytes) -> x509.Certificate:
    data = pem.encode("utf-8") if isinstance(pem, str) else pem
    try:
        if data.lstrip().startswith(b"-----BEGIN"):
            return x509.load_pem_x509_certificate(data)
        return x509.load_der_x509_certificate(data)
    except Exception as exc:
        raise MalformedCertificate(str(exc)) from exc


def verify_chain(cert_pem: str | bytes, ca_store: Iterable[str | bytes],
                 intermediates: Iterable[str | bytes] = (),
                 now: Optional[datetime] = None) -> DistinguishedName:
    """Validate a certificate against trusted CAs; returns its slash-form DN."""
    cert = load_certificate(cert_pem)
    cas = [load_certificate(p) for p in ca_store]
    if not cas:
        raise ChainVerifyFailed("empty CA store")
    now = now or datetime.now(timezone.utc)
    if not (cert.not_valid_before_utc <= now <= cert.not_valid_after_utc):
        raise ExpiredCertificate(
            f"valid {cert.not_valid_before_utc} .. {cert.not_valid_after_utc}")

    pool = [load_certificate(p) for p in intermediates]

    def issued_by_trusted(c: x509.Certificate, depth: int) -> bool:
        if depth > 4:
            return False
        for ca in cas:
            try:
                c.verify_directly_issued_by(ca)
                return True
            except (InvalidSignature, ValueError, TypeError):
                continue
        for mid in pool:
            if mid is c:
                continue
            try:
                c.verify_directly_issued_by(mid)
            except (InvalidSignature, ValueError, TypeError):
                continue
            if issued_by_trusted(mid, depth + 1):
                return True
        return False

    if not issued_by_trusted(cert, 0):
        raise ChainVerifyFailed("no trusted issuer found")
    return subject_to_slash_dn(cert.subject)


@dataclass
class CertificateBundle:
    pem: str
    subject_dn: DistinguishedName
    certificate: x509.Certificate
    issuer_chain: list[str]

    @classmethod
    def from_pem(cls, pem: str | bytes,
                 issuer_chain: Iterable[str] = ()) -> "CertificateBundle":
        cert = load_certificate(pem)
        if isinstance(pem, str) and pem.lstrip().startswith("-----BEGIN"):
            text = pem
        else:
            text = cert.public_bytes(serialization.Encoding.PEM).decode("utf-8")
        return cls(pem=text, subject_dn=subject_to_slash_dn(cert.subject),
                   certificate=cert, issuer_chain=list(issuer_chain))

    @property
    def public_key(self):
        return self.certificate.public_key()


@dataclass
class Session:
    client_id: str
    server_id: str
    dn: str
    created_at: datetime
    expires_at: datetime
    origin: str  # "tls_cookie" | "basic_exchange"

    def to_record(self) -> bytes:
        return json.dumps({
            "client_id": self.client_id,
            "server_id": self.server_id,
            "dn": self.dn,
            "created_at": self.created_at.isoformat(),
            "expires_at": self.expires_at.isoformat(),
            "origin": self.origin,
        }, sort_keys=True).encode("utf-8")

    @classmethod
    def from_record(cls, record: bytes) -> "Session":
        data = json.loads(record.decode("utf-8"))
        return cls(client_id=data["client_id"], server_id=data["server_id"],
                   dn=data["dn"],
                   created_at=datetime.fromisoformat(data["created_at"]),
                   expires_at=datetime.fromisoformat(data["expires_at"]),
                   origin=data["origin"])


class SessionManager:
    """Persisted (client_id, server_id) pairs bound to authenticated DNs."""

    KEY_PREFIX = "session/"

    def __init__(self, store: KvStore, ttl_seconds: int = 86400):
        self.store = store
        self.ttl_seconds = ttl_seconds

    def create(self, client_id: str, dn: str, origin: str,
               now: Optional[datetime] = None) -> Session:
        now = now or datetime.now(timezone.utc)
        server_id = base64.b64encode(secrets.token_bytes(SERVER_ID_BYTES)).decode()
        session = Session(client_id=client_id, server_id=server_id, dn=dn,
                          created_at=now,
                          expires_at=now + timedelta(seconds=self.ttl_seconds),
                          origin=origin)
        # Keyed by client_id: re-requesting the same id atomically
        # invalidates the previous (client_id, server_id) pair.
        self.store.put(self.KEY_PREFIX + client_id, session.to_record())
        return session

    def validate(self, client_id: str, server_id: str,
                 now: Optional[datetime] = None) -> Optional[Session]:
        if not client_id or not server_id:
            return None
        record = self.store.get(self.KEY_PREFIX + client_id)
        if record is None:
            return None
        session = Session.from_record(record)
        if not hmac.compare_digest(session.server_id.encode(), server_id.encode()):
            return None
        now = now or datetime.now(timezone.utc)
        if now >= session.expires_at:
            return None
        return session

    def list_sessions(self) -> list[Session]:
        return [Session.from_record(v)
                for _, v in self.store.scan(self.KEY_PREFIX)]

    def revoke(self, client_id: str) -> None:
        self.store.delete(self.KEY_PREFIX + client_id)


class AuthService:
    def __init__(self, server_cert_pem: str, server_key_pem: bytes | str,
                 ca_store: Iterable[str], sessions: SessionManager):
        self.server_cert_pem = (server_cert_pem.decode()
                                if isinstance(server_cert_pem, bytes)
                                else server_cert_pem)
        key_data = (server_key_pem.encode()
                    if isinstance(server_key_pem, str) else server_key_pem)
        self.server_key = serialization.load_pem_private_key(key_data, password=None)
        self.ca_store = [c.decode() if isinstance(c, bytes) else c for c in ca_store]
        self.sessions = sessions

    def handshake_tls(self, peer_cert: Optional[CertificateBundle],
                      cookies: dict[str, str]) -> tuple[str, str]:
        """system.auth2: TLS peer certificate plus cookie protocol."""
        if peer_cert is None:
            raise NoPeerCertificate("system.auth2 requires a TLS client certificate")
        client_id = cookies.get(COOKIE_USERNAME)
        password = cookies.get(COOKIE_PASSWORD)
        if not client_id or password != BROWSER_SENTINEL:
            raise BadCookieProtocol(
                f"expected {COOKIE_USERNAME}=<id>, {COOKIE_PASSWORD}={BROWSER_SENTINEL}")
        dn = verify_chain(peer_cert.pem, self.ca_store,
                          intermediates=peer_cert.issuer_chain)
        session = self.sessions.create(client_id, dn.raw, origin="tls_cookie")
        return self.server_cert_pem, session.server_id

    def handshake_basic(self, client_cert_pem: str,
                        client_id: str) -> tuple[str, str, str]:
        """system.auth: returns (server cert, encrypted server id, signed client id)."""
        client_id_bytes = client_id.encode("utf-8")
        if len(client_id_bytes) > MAX_CLIENT_ID_BYTES:
            raise OversizedClientId(f"{len(client_id_bytes)} bytes > {MAX_CLIENT_ID_BYTES}")
        cert = load_certificate(client_cert_pem)
        public_key = cert.public_key()
        if not isinstance(public_key, rsa.RSAPublicKey):
            raise MalformedCertificate("client certificate must carry an RSA key")
        dn = verify_chain(client_cert_pem, self.ca_store)
        session = self.sessions.create(client_id, dn.raw, origin="basic_exchange")
        enc_server_id = public_key.encrypt(session.server_id.encode("utf-8"), _OAEP)
        signed_client_id = self.server_key.sign(
            client_id_bytes, padding.PKCS1v15(), hashes.SHA256())
        return (self.server_cert_pem,
                base64.b64encode(enc_server_id).decode(),
                base64.b64encode(signed_client_id).decode())

    def validate_session(self, client_id: str, server_id: str,
                         now: Optional[datetime] = None) -> Optional[Session]:
        return self.sessions.validate(client_id, server_id, now)
