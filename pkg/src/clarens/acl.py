"""Hierarchical method ACLs and the ACL-shaped DN-to-username mapping.

An ACL names an evaluation order (deny,allow or allow,deny) and four lists:
DNs allowed, groups allowed, DNs denied, groups denied.  Method access walks
the dotted method name from its most specific prefix upward; the first level
whose ACL reaches a verdict wins, and if every level is undecided the request
is denied.  A level is undecided when neither its allow nor its deny lists
match the caller; when both match, the second-named list in the order wins.

User mapping reuses the same shape with the username in place of the method
name and the deny lists unused.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional

from .errors import DenyListForbidden, MalformedMethodName
from .store import KvStore, MemoryKvStore
from .ternary import TernaryTree
from .vo import VoRegistry

_METHOD_KEY = "acl/method/"
_USER_KEY = "acl/user/"

# Dotted names; the first segment may be user-scoped ("~alice.tools.run").
_METHOD_RE = re.compile(r"^~?[A-Za-z0-9_][A-Za-z0-9_-]*(\.[A-Za-z0-9_][A-Za-z0-9_-]*)*$")


class AclOrder(str, Enum):
    DENY_THEN_ALLOW = "deny,allow"
    ALLOW_THEN_DENY = "allow,deny"


class Verdict(str, Enum):
    ALLOW = "allow"
    DENY = "deny"
    UNDECIDED = "undecided"


@dataclass
class AclDecision:
    verdict: Verdict
    decided_at: Optional[str] = None


class AccessControlList:
    def __init__(self, order: AclOrder = AclOrder.DENY_THEN_ALLOW,
                 allow_dns: Iterable[str] = (), allow_groups: Iterable[str] = (),
                 deny_dns: Iterable[str] = (), deny_groups: Iterable[str] = ()):
        self.order = AclOrder(order)
        self.allow_dns = TernaryTree(allow_dns)
        self.allow_groups = list(allow_groups)
        self.deny_dns = TernaryTree(deny_dns)
        self.deny_groups = list(deny_groups)

    def matches_allow(self, dn: str, registry: VoRegistry) -> bool:
        if self.allow_dns.longest_prefix_match(dn) is not None:
            return True
        return any(registry.is_member(g, dn) for g in self.allow_groups)

    def matches_deny(self, dn: str, registry: VoRegistry) -> bool:
        if self.deny_dns.longest_prefix_match(dn) is not None:
            return True
        return any(registry.is_member(g, dn) for g in self.deny_groups)

    def to_record(self) -> bytes:
        return json.dumps({
            "order": self.order.value,
            "allow_dns": sorted(d.decode("utf-8") for d in self.allow_dns),
            "allow_groups": list(self.allow_groups),
            "deny_dns": sorted(d.decode("utf-8") for d in self.deny_dns),
            "deny_groups": list(self.deny_groups),
        }, sort_keys=True).encode("utf-8")

    @classmethod
    def from_record(cls, record: bytes) -> "AccessControlList":
        data = json.loads(record.decode("utf-8"))
        return cls(order=AclOrder(data["order"]),
                   allow_dns=data.get("allow_dns", ()),
                   allow_groups=data.get("allow_groups", ()),
                   deny_dns=data.get("deny_dns", ()),
                   deny_groups=data.get("deny_groups", ()))


def evaluate_level(acl: AccessControlList, dn: str,
                   registry: VoRegistry) -> AclDecision:
    """Single-level verdict; the order's second-named list wins a double match."""
    matched_allow = acl.matches_allow(dn, registry)
    matched_deny = acl.matches_deny(dn, registry)
    if acl.order is AclOrder.DENY_THEN_ALLOW:
        if matched_allow:
            return AclDecision(Verdict.ALLOW)
        if matched_deny:
            return AclDecision(Verdict.DENY)
    else:
        if matched_deny:
            return AclDecision(Verdict.DENY)
        if matched_allow:
            return AclDecision(Verdict.ALLOW)
    return AclDecision(Verdict.UNDECIDED)


def method_prefixes(method: str) -> list[str]:
    """All dotted prefixes, most specific first."""
    if not _METHOD_RE.match(method or ""):
        raise MalformedMethodName(repr(method))
    parts = method.split(".")
    return [".".join(parts[:i]) for i in range(len(parts), 0, -1)]


class AclStore:
    def __init__(self, store: Optional[KvStore] = None):
        self.store = store if store is not None else MemoryKvStore()
        self.method_acls: dict[str, AccessControlList] = {}
        self.user_map: dict[str, AccessControlList] = {}
        self._lock = threading.RLock()

    @classmethod
    def load(cls, store: Optional[KvStore] = None) -> "AclStore":
        acls = cls(store)
        for key, record in acls.store.scan(_METHOD_KEY):
            prefix = key.decode("utf-8")[len(_METHOD_KEY):]
            acls.method_acls[prefix] = AccessControlList.from_record(record)
        for key, record in acls.store.scan(_USER_KEY):
            user = key.decode("utf-8")[len(_USER_KEY):]
            acls.user_map[user] = AccessControlList.from_record(record)
        return acls

    # --- evaluation ---

    def check_method_access(self, method: str, dn: str,
                            registry: VoRegistry) -> AclDecision:
        """Most-specific-level verdict wins; no verdict anywhere means deny."""
        for prefix in method_prefixes(method):
            acl = self.method_acls.get(prefix)
            if acl is None:
                continue
            decision = evaluate_level(acl, dn, registry)
            if decision.verdict is not Verdict.UNDECIDED:
                decision.decided_at = prefix
                return decision
        return AclDecision(Verdict.DENY, decided_at=None)

    def map_user(self, dn: str, registry: VoRegistry) -> Optional[str]:
        """Username whose ACL allows dn; longest DN-prefix match breaks ties,
        then the lexicographically smallest username."""
        best: Optional[tuple[int, str]] = None
        for username in sorted(self.user_map):
            acl = self.user_map[username]
            if evaluate_level(acl, dn, registry).verdict is not Verdict.ALLOW:
                continue
            match_len = acl.allow_dns.longest_prefix_match(dn)
            score = match_len if match_len is not None else 0
            if best is None or score > best[0]:
                best = (score, username)
        return best[1] if best else None

    # --- administration ---

    def set_method_acl(self, method_prefix: str, acl: AccessControlList) -> None:
        if not _METHOD_RE.match(method_prefix or ""):
            raise MalformedMethodName(repr(method_prefix))
        with self._lock:
            self.store.put(_METHOD_KEY + method_prefix, acl.to_record())
            self.method_acls[method_prefix] = acl

    def get_method_acl(self, method_prefix: str) -> Optional[AccessControlList]:
        return self.method_acls.get(method_prefix)

    def set_user_mapping(self, username: str, acl: AccessControlList) -> None:
        if not username or "/" in username or "\t" in username:
            raise MalformedMethodName(f"bad username {username!r}")
        if len(acl.deny_dns) or acl.deny_groups:
            raise DenyListForbidden("user-mapping ACLs may not carry deny entries")
        with self._lock:
            self.store.put(_USER_KEY + username, acl.to_record())
            self.user_map[username] = acl

    def get_user_mapping(self, username: str) -> Optional[AccessControlList]:
        return self.user_map.get(username)
