"""Small PKI helpers for generating a CA plus server/client certificates.

Used by the test suites (python and the TypeScript client) and handy for
standing up a demo deployment; not intended as a general-purpose CA.

Run ``python -m clarens.pkitools OUTDIR`` to write ca/server/client key pairs.
"""

from __future__ import annotations

import datetime
import ipaddress
import os
import sys

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import rsa
from cryptography.x509.oid import NameOID

_KEY_MAP = {
    "C": NameOID.COUNTRY_NAME,
    "ST": NameOID.STATE_OR_PROVINCE_NAME,
    "L": NameOID.LOCALITY_NAME,
    "O": NameOID.ORGANIZATION_NAME,
    "OU": NameOID.ORGANIZATIONAL_UNIT_NAME,
    "CN": NameOID.COMMON_NAME,
    "Email": NameOID.EMAIL_ADDRESS,
}


def _name(attrs: list[tuple[str, str]]) -> x509.Name:
    return x509.Name([
        x509.RelativeDistinguishedName([x509.NameAttribute(_KEY_MAP[k], v)])
        for k, v in attrs
    ])


def _pem_cert(cert: x509.Certificate) -> str:
    return cert.public_bytes(serialization.Encoding.PEM).decode()


def _pem_key(key) -> str:
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    ).decode()


def make_ca(attrs: list[tuple[str, str]],
            days: int = 3650) -> tuple[str, str]:
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    name = _name(attrs)
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name).issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(minutes=5))
        .not_valid_after(now + datetime.timedelta(days=days))
        .add_extension(x509.BasicConstraints(ca=True, path_length=1), critical=True)
        .sign(key, hashes.SHA256())
    )
    return _pem_cert(cert), _pem_key(key)


def issue_cert(ca_cert_pem: str, ca_key_pem: str,
               attrs: list[tuple[str, str]], days: int = 365,
               not_before: datetime.datetime | None = None,
               not_after: datetime.datetime | None = None,
               san_hosts: list[str] | None = None,
               is_ca: bool = False) -> tuple[str, str]:
    ca_cert = x509.load_pem_x509_certificate(ca_cert_pem.encode())
    ca_key = serialization.load_pem_private_key(ca_key_pem.encode(), password=None)
    key = rsa.generate_private_key(public_exponent=65537, key_size=2048)
    now = datetime.datetime.now(datetime.timezone.utc)
    builder = (
        x509.CertificateBuilder()
        .subject_name(_name(attrs)).issuer_name(ca_cert.subject)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(not_before or now - datetime.timedelta(minutes=5))
        .not_valid_after(not_after or now + datetime.timedelta(days=days))
        .add_extension(x509.BasicConstraints(ca=is_ca, path_length=None),
                       critical=True)
    )
    if san_hosts:
        names = []
        for host in san_hosts:
            try:
                names.append(x509.IPAddress(ipaddress.ip_address(host)))
            except ValueError:
                names.append(x509.DNSName(host))
        builder = builder.add_extension(
            x509.SubjectAlternativeName(names), critical=False)
    cert = builder.sign(ca_key, hashes.SHA256())
    return _pem_cert(cert), _pem_key(key)


def write_test_pki(outdir: str) -> dict[str, str]:
    """Generate ca/server/client credentials under outdir; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    ca_pem, ca_key = make_ca([("O", "clarens-test"), ("CN", "Test CA")])
    server_pem, server_key = issue_cert(
        ca_pem, ca_key,
        [("O", "clarens-test"), ("OU", "Services"), ("CN", "localhost")],
        san_hosts=["localhost", "127.0.0.1"])
    client_pem, client_key = issue_cert(
        ca_pem, ca_key,
        [("O", "clarens-test"), ("OU", "People"), ("CN", "Test Client 1")])
    paths = {}
    for name, data in [
        ("ca.pem", ca_pem), ("ca.key", ca_key),
        ("server.pem", server_pem), ("server.key", server_key),
        ("client.pem", client_pem), ("client.key", client_key),
    ]:
        path = os.path.join(outdir, name)
        with open(path, "w") as fh:
            fh.write(data)
        paths[name] = path
    return paths


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "pki"
    for name, path in sorted(write_test_pki(target).items()):
        print(path)
