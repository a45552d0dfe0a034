import pytest

from clarens.pkitools import issue_cert, make_ca

ADMIN_DN = "/O=clarens-test/OU=People/CN=Test Client 1"


@pytest.fixture(scope="session")
def pki():
    """One CA with a server cert, a client cert, and a second (untrusted) CA."""
    ca_pem, ca_key = make_ca([("O", "clarens-test"), ("CN", "Test CA")])
    server_pem, server_key = issue_cert(
        ca_pem, ca_key,
        [("O", "clarens-test"), ("OU", "Services"), ("CN", "localhost")],
        san_hosts=["localhost", "127.0.0.1"])
    client_pem, client_key = issue_cert(
        ca_pem, ca_key,
        [("O", "clarens-test"), ("OU", "People"), ("CN", "Test Client 1")])
    other_ca_pem, other_ca_key = make_ca([("O", "intruders"), ("CN", "Rogue CA")])
    rogue_pem, rogue_key = issue_cert(
        other_ca_pem, other_ca_key,
        [("O", "intruders"), ("OU", "People"), ("CN", "Rogue Client")])
    return {
        "ca_pem": ca_pem, "ca_key": ca_key,
        "server_pem": server_pem, "server_key": server_key,
        "client_pem": client_pem, "client_key": client_key,
        "client_dn": ADMIN_DN,
        "other_ca_pem": other_ca_pem, "other_ca_key": other_ca_key,
        "rogue_pem": rogue_pem, "rogue_key": rogue_key,
    }


@pytest.fixture(scope="session")
def pki_dir(pki, tmp_path_factory):
    root = tmp_path_factory.mktemp("pki")
    paths = {}
    for name in ("ca_pem", "server_pem", "server_key", "client_pem",
                 "client_key", "other_ca_pem", "rogue_pem", "rogue_key"):
        p = root / (name.replace("_pem", ".pem").replace("_key", ".key"))
        p.write_text(pki[name])
        paths[name] = str(p)
    return paths
