"""Server configuration: plain key=value file with [section] headers.

Example:

    [server]
    listen = 127.0.0.1:8443
    rpc_url_prefix = /clarens/
    tls_required = true
    cert = pki/server.pem
    key = pki/server.key
    ca = pki/ca.pem
    file_root = www
    session_ttl = 86400
    audit_log = audit.log
    store = data
    max_body = 16777216

    [admins]
    dn = /O=doesciencegrid.org/OU=People/CN=John Smith 12345

    [modules]
    mytools = mypkg.tools:methods

Repeated keys accumulate into lists (used for admins.dn).  Environment
variables of the form CLARENS_<SECTION>_<KEY> override file values, e.g.
CLARENS_SERVER_LISTEN=0.0.0.0:9443.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

DEFAULT_RPC_PREFIX = "/clarens/"
DEFAULT_MAX_BODY = 16 * 1024 * 1024
DEFAULT_SESSION_TTL = 86400


class ConfigError(Exception):
    pass


def parse_config_text(text: str) -> dict[str, dict[str, list[str]]]:
    sections: dict[str, dict[str, list[str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        sections[current].setdefault(key.strip().lower(), []).append(value.strip())
    return sections


def _apply_env(sections: dict[str, dict[str, list[str]]],
               environ=os.environ) -> None:
    for name, value in environ.items():
        if not name.startswith("CLARENS_"):
            continue
        parts = name.split("_", 2)
        if len(parts) != 3:
            continue
        _, section, key = parts
        sections.setdefault(section.lower(), {})[key.lower()] = [value]


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class GatewayConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8443
    rpc_url_prefix: str = DEFAULT_RPC_PREFIX
    tls_required: bool = True
    tls_enabled: bool = True
    cert_path: Optional[str] = None
    key_path: Optional[str] = None
    ca_path: Optional[str] = None
    admin_dns: list[str] = field(default_factory=list)
    module_manifest: dict[str, str] = field(default_factory=dict)
    file_root: Optional[str] = None
    session_ttl: int = DEFAULT_SESSION_TTL
    audit_log: Optional[str] = None
    store_path: Optional[str] = None
    max_body: int = DEFAULT_MAX_BODY

    def __post_init__(self):
        if not (self.rpc_url_prefix.startswith("/")
                and self.rpc_url_prefix.endswith("/")):
            raise ConfigError("rpc_url_prefix must begin and end with '/'")
        if self.file_root is not None and not os.path.isdir(self.file_root):
            raise ConfigError(f"file_root is not a directory: {self.file_root}")

    @property
    def listen(self) -> str:
        return f"{self.listen_host}:{self.listen_port}"

    @classmethod
    def load(cls, path: Optional[str] = None, environ=os.environ,
             overrides: Optional[dict[str, str]] = None) -> "GatewayConfig":
        sections: dict[str, dict[str, list[str]]] = {}
        base = "."
        if path:
            with open(path) as fh:
                sections = parse_config_text(fh.read())
            base = os.path.dirname(os.path.abspath(path))
        _apply_env(sections, environ)
        server = {k: v[-1] for k, v in sections.get("server", {}).items()}
        if overrides:
            server.update({k: v for k, v in overrides.items() if v is not None})

        def resolve(p: Optional[str]) -> Optional[str]:
            if p is None:
                return None
            return p if os.path.isabs(p) else os.path.join(base, p)

        listen = server.get("listen", "127.0.0.1:8443")
        host, _, port = listen.rpartition(":")
        if not host or not port.isdigit():
            raise ConfigError(f"bad listen address {listen!r}")
        manifest = {k: v[-1] for k, v in sections.get("modules", {}).items()}
        return cls(
            listen_host=host,
            listen_port=int(port),
            rpc_url_prefix=server.get("rpc_url_prefix", DEFAULT_RPC_PREFIX),
            tls_required=_bool(server.get("tls_required", "true")),
            tls_enabled=_bool(server.get("tls_enabled", server.get("tls", "true"))),
            cert_path=resolve(server.get("cert")),
            key_path=resolve(server.get("key")),
            ca_path=resolve(server.get("ca")),
            admin_dns=list(sections.get("admins", {}).get("dn", [])),
            module_manifest=manifest,
            file_root=resolve(server.get("file_root")),
            session_ttl=int(server.get("session_ttl", DEFAULT_SESSION_TTL)),
            audit_log=resolve(server.get("audit_log")),
            store_path=resolve(server.get("store")),
            max_body=int(server.get("max_body", DEFAULT_MAX_BODY)),
        )
