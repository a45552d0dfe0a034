import base64
from datetime import datetime, timedelta, timezone

import pytest
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding

from clarens.auth import (
    BROWSER_SENTINEL,
    COOKIE_PASSWORD,
    COOKIE_USERNAME,
    MAX_CLIENT_ID_BYTES,
    AuthService,
    CertificateBundle,
    SessionManager,
    load_certificate,
    subject_to_slash_dn,
    verify_chain,
)
from clarens.errors import (
    BadCookieProtocol,
    ChainVerifyFailed,
    ExpiredCertificate,
    MalformedCertificate,
    NoPeerCertificate,
    OversizedClientId,
)
from clarens.pkitools import issue_cert, make_ca
from clarens.store import MemoryKvStore
from tests.conftest import ADMIN_DN

_OAEP = padding.OAEP(mgf=padding.MGF1(algorithm=hashes.SHA256()),
                     algorithm=hashes.SHA256(), label=None)


def _load_key(pem: str):
    return serialization.load_pem_private_key(pem.encode(), password=None)


@pytest.fixture
def auth(pki):
    sessions = SessionManager(MemoryKvStore())
    return AuthService(pki["server_pem"], pki["server_key"],
                       [pki["ca_pem"]], sessions)


# --- certificates and chains ---

def test_subject_to_slash_dn(pki):
    cert = load_certificate(pki["client_pem"])
    assert subject_to_slash_dn(cert.subject).raw == ADMIN_DN


def test_load_certificate_pem_and_der(pki):
    cert = load_certificate(pki["client_pem"])
    der = cert.public_bytes(serialization.Encoding.DER)
    assert load_certificate(der).subject == cert.subject
    with pytest.raises(MalformedCertificate):
        load_certificate(b"junk")


def test_verify_chain_accepts_issued_cert(pki):
    dn = verify_chain(pki["client_pem"], [pki["ca_pem"]])
    assert dn.raw == ADMIN_DN


def test_verify_chain_rejects_untrusted_issuer(pki):
    with pytest.raises(ChainVerifyFailed):
        verify_chain(pki["rogue_pem"], [pki["ca_pem"]])
    with pytest.raises(ChainVerifyFailed):
        verify_chain(pki["client_pem"], [pki["other_ca_pem"]])
    with pytest.raises(ChainVerifyFailed):
        verify_chain(pki["client_pem"], [])


def test_verify_chain_rejects_expired(pki):
    future = datetime.now(timezone.utc) + timedelta(days=5000)
    with pytest.raises(ExpiredCertificate):
        verify_chain(pki["client_pem"], [pki["ca_pem"]], now=future)


def test_verify_chain_through_intermediate():
    root_pem, root_key = make_ca([("O", "t"), ("CN", "Root")])
    mid_pem, mid_key = issue_cert(root_pem, root_key,
                                  [("O", "t"), ("CN", "Mid CA")], is_ca=True)
    leaf_pem, _ = issue_cert(mid_pem, mid_key, [("O", "t"), ("CN", "Leaf")])
    dn = verify_chain(leaf_pem, [root_pem], intermediates=[mid_pem])
    assert dn.common_name == "Leaf"
    with pytest.raises(ChainVerifyFailed):
        verify_chain(leaf_pem, [root_pem])


def test_bundle_from_pem_and_der(pki):
    b1 = CertificateBundle.from_pem(pki["client_pem"])
    assert b1.subject_dn.raw == ADMIN_DN
    der = b1.certificate.public_bytes(serialization.Encoding.DER)
    b2 = CertificateBundle.from_pem(der)
    assert b2.subject_dn.raw == ADMIN_DN
    assert b2.pem.startswith("-----BEGIN CERTIFICATE-----")


# --- sessions ---

def test_session_create_validate_expire():
    sessions = SessionManager(MemoryKvStore(), ttl_seconds=60)
    s = sessions.create("client-1", "/O=x/CN=y", origin="basic_exchange")
    assert sessions.validate("client-1", s.server_id) is not None
    assert sessions.validate("client-1", "wrong") is None
    assert sessions.validate("other", s.server_id) is None
    late = datetime.now(timezone.utc) + timedelta(seconds=61)
    assert sessions.validate("client-1", s.server_id, now=late) is None


def test_session_reissue_invalidates_old_pair():
    sessions = SessionManager(MemoryKvStore())
    s1 = sessions.create("client-1", "/O=x/CN=y", origin="tls_cookie")
    s2 = sessions.create("client-1", "/O=x/CN=y", origin="tls_cookie")
    assert sessions.validate("client-1", s1.server_id) is None
    assert sessions.validate("client-1", s2.server_id) is not None


def test_session_revoke_and_list():
    sessions = SessionManager(MemoryKvStore())
    s = sessions.create("c1", "/O=x/CN=y", origin="tls_cookie")
    sessions.create("c2", "/O=x/CN=z", origin="tls_cookie")
    assert {x.client_id for x in sessions.list_sessions()} == {"c1", "c2"}
    sessions.revoke("c1")
    assert sessions.validate("c1", s.server_id) is None
    assert {x.client_id for x in sessions.list_sessions()} == {"c2"}


def test_session_survives_store_round_trip():
    store = MemoryKvStore()
    s = SessionManager(store).create("c1", "/O=x/CN=y", origin="basic_exchange")
    fresh = SessionManager(store)
    found = fresh.validate("c1", s.server_id)
    assert found is not None and found.dn == "/O=x/CN=y"


def test_server_id_entropy():
    sessions = SessionManager(MemoryKvStore())
    ids = {sessions.create(f"c{i}", "/O=x/CN=y", origin="tls_cookie").server_id
           for i in range(10000)}
    assert len(ids) == 10000
    assert all(len(base64.b64decode(i)) == 32 for i in ids)


# --- system.auth2 TLS/cookie flow ---

def test_handshake_tls_happy_path(auth, pki):
    bundle = CertificateBundle.from_pem(pki["client_pem"])
    cookies = {COOKIE_USERNAME: "my-id", COOKIE_PASSWORD: BROWSER_SENTINEL}
    server_pem, server_id = auth.handshake_tls(bundle, cookies)
    assert server_pem == pki["server_pem"]
    session = auth.validate_session("my-id", server_id)
    assert session is not None and session.dn == ADMIN_DN
    assert session.origin == "tls_cookie"


def test_handshake_tls_requires_peer_cert(auth):
    with pytest.raises(NoPeerCertificate):
        auth.handshake_tls(None, {COOKIE_USERNAME: "x",
                                  COOKIE_PASSWORD: BROWSER_SENTINEL})


def test_handshake_tls_cookie_protocol(auth, pki):
    bundle = CertificateBundle.from_pem(pki["client_pem"])
    for cookies in ({}, {COOKIE_USERNAME: "x"},
                    {COOKIE_USERNAME: "x", COOKIE_PASSWORD: "nope"},
                    {COOKIE_PASSWORD: BROWSER_SENTINEL}):
        with pytest.raises(BadCookieProtocol):
            auth.handshake_tls(bundle, cookies)


def test_handshake_tls_rejects_untrusted_cert(auth, pki):
    bundle = CertificateBundle.from_pem(pki["rogue_pem"])
    with pytest.raises(ChainVerifyFailed):
        auth.handshake_tls(bundle, {COOKIE_USERNAME: "x",
                                    COOKIE_PASSWORD: BROWSER_SENTINEL})


# --- system.auth Basic-auth exchange ---

def test_handshake_basic_round_trip(auth, pki):
    server_pem, enc_id, signed = auth.handshake_basic(pki["client_pem"], "cid-1")
    assert server_pem == pki["server_pem"]
    # Only the client key recovers the server id.
    client_key = _load_key(pki["client_key"])
    server_id = client_key.decrypt(base64.b64decode(enc_id), _OAEP).decode()
    assert auth.validate_session("cid-1", server_id) is not None
    # The signature proves possession of the key behind the server cert.
    server_cert = load_certificate(server_pem)
    server_cert.public_key().verify(base64.b64decode(signed), b"cid-1",
                                    padding.PKCS1v15(), hashes.SHA256())


def test_handshake_basic_wrong_key_cannot_decrypt(auth, pki):
    _, enc_id, _ = auth.handshake_basic(pki["client_pem"], "cid-2")
    rogue_key = _load_key(pki["rogue_key"])
    with pytest.raises(ValueError):
        rogue_key.decrypt(base64.b64decode(enc_id), _OAEP)


def test_handshake_basic_rejects_untrusted_ca(auth, pki):
    with pytest.raises(ChainVerifyFailed):
        auth.handshake_basic(pki["rogue_pem"], "cid-3")


def test_handshake_basic_oversized_client_id(auth, pki):
    with pytest.raises(OversizedClientId):
        auth.handshake_basic(pki["client_pem"], "x" * (MAX_CLIENT_ID_BYTES + 1))
    auth.handshake_basic(pki["client_pem"], "x" * MAX_CLIENT_ID_BYTES)


def test_handshake_basic_reissue_invalidates(auth, pki):
    client_key = _load_key(pki["client_key"])

    def grab():
        _, enc_id, _ = auth.handshake_basic(pki["client_pem"], "cid-4")
        return client_key.decrypt(base64.b64decode(enc_id), _OAEP).decode()

    first = grab()
    second = grab()
    assert auth.validate_session("cid-4", first) is None
    assert auth.validate_session("cid-4", second) is not None
