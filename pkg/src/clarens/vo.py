"""Hierarchical virtual-organization registry.

Groups form a dotted-path tree ("CMS", "CMS.USA", "CMS.USA.Caltech").  Each
group carries two DN lists, members and administrators, stored in ternary
trees so that entries may be either full DNs or initial DN fragments.
Membership inherits downward: a member of "CMS" is automatically a member of
every group under it.  Administrators of a group govern the groups below it;
the reserved top-level "admins" group governs everything and its membership
is re-seeded from server configuration on every startup.
"""

from __future__ import annotations

import json
import threading
from typing import Iterable, Optional

from .dn import is_dn_shaped
from .errors import (
    DuplicateGroup,
    EmptyAdmins,
    MalformedDn,
    MissingParent,
    NoSuchGroup,
    NotAuthorized,
    ProtectedGroup,
)
from .store import KvStore, MemoryKvStore
from .ternary import TernaryTree

ADMINS_GROUP = "admins"
_KEY_PREFIX = "vo/"


def valid_group_path(path: str) -> bool:
    if not path or not isinstance(path, str):
        return False
    return all(seg and "/" not in seg and not seg.isspace()
               for seg in path.split("."))


def ancestors(path: str) -> list[str]:
    """Strict ancestors of a dotted path, nearest first."""
    parts = path.split(".")
    return [".".join(parts[:i]) for i in range(len(parts) - 1, 0, -1)]


class VoGroup:
    def __init__(self, path: str, members: Iterable[str] = (),
                 administrators: Iterable[str] = ()):
        self.path = path
        self.members = TernaryTree()
        self.administrators = TernaryTree()
        for dn in members:
            self._checked_insert(self.members, dn)
        for dn in administrators:
            self._checked_insert(self.administrators, dn)

    @staticmethod
    def _checked_insert(tree: TernaryTree, entry: str) -> None:
        # Entries must be DN-shaped fragments; bare substrings would grant
        # far more than intended.
        if not is_dn_shaped(entry):
            raise MalformedDn(f"not a DN or DN fragment: {entry!r}")
        tree.insert(entry)

    def member_list(self) -> list[str]:
        return [m.decode("utf-8") for m in self.members]

    def administrator_list(self) -> list[str]:
        return [a.decode("utf-8") for a in self.administrators]

    def to_record(self) -> bytes:
        return json.dumps({
            "members": self.member_list(),
            "administrators": self.administrator_list(),
        }, sort_keys=True).encode("utf-8")

    @classmethod
    def from_record(cls, path: str, record: bytes) -> "VoGroup":
        data = json.loads(record.decode("utf-8"))
        return cls(path, data.get("members", ()),
                   data.get("administrators", ()))


class VoRegistry:
    """Group tree plus the authorization rules for editing it."""

    def __init__(self, store: Optional[KvStore] = None):
        self.store = store if store is not None else MemoryKvStore()
        self.groups: dict[str, VoGroup] = {}
        self._lock = threading.RLock()

    # --- bootstrap ---

    @classmethod
    def bootstrap(cls, config_admin_dns: list[str],
                  store: Optional[KvStore] = None) -> "VoRegistry":
        """Load persisted groups; (re)seed admins from configuration.

        The admins membership is config-authoritative: whatever was persisted
        for it is discarded on every restart.
        """
        if not config_admin_dns:
            raise EmptyAdmins("server configuration must name at least one admin DN")
        registry = cls(store)
        for key, record in registry.store.scan(_KEY_PREFIX):
            path = key.decode("utf-8")[len(_KEY_PREFIX):]
            if path == ADMINS_GROUP:
                continue
            registry.groups[path] = VoGroup.from_record(path, record)
        admins = VoGroup(ADMINS_GROUP, members=config_admin_dns)
        registry.groups[ADMINS_GROUP] = admins
        registry._persist(admins)
        return registry

    @classmethod
    def load(cls, store: Optional[KvStore] = None) -> "VoRegistry":
        """Load persisted groups as-is (admins included); used by offline tools."""
        registry = cls(store)
        for key, record in registry.store.scan(_KEY_PREFIX):
            path = key.decode("utf-8")[len(_KEY_PREFIX):]
            registry.groups[path] = VoGroup.from_record(path, record)
        if ADMINS_GROUP not in registry.groups:
            registry.groups[ADMINS_GROUP] = VoGroup(ADMINS_GROUP)
        return registry

    def _persist(self, group: VoGroup) -> None:
        self.store.put(_KEY_PREFIX + group.path, group.to_record())

    # --- queries ---

    def get_group(self, path: str) -> VoGroup:
        try:
            return self.groups[path]
        except KeyError:
            raise NoSuchGroup(path) from None

    def list_groups(self) -> list[str]:
        return sorted(self.groups)

    def is_admins_member(self, dn: str) -> bool:
        admins = self.groups.get(ADMINS_GROUP)
        return (admins is not None
                and admins.members.longest_prefix_match(dn) is not None)

    def is_member(self, path: str, dn: str) -> bool:
        """Top-down inheritance: listed in the group or any strict ancestor."""
        if path not in self.groups:
            return False
        for candidate in [path] + ancestors(path):
            group = self.groups.get(candidate)
            if group and group.members.longest_prefix_match(dn) is not None:
                return True
        return False

    def is_group_admin(self, path: str, dn: str) -> bool:
        if self.is_admins_member(dn):
            return True
        for candidate in [path] + ancestors(path):
            group = self.groups.get(candidate)
            if group and group.administrators.longest_prefix_match(dn) is not None:
                return True
        return False

    def _may_govern_new(self, path: str, dn: str) -> bool:
        """Create/delete authority: admins, or administrator of a strict ancestor."""
        if self.is_admins_member(dn):
            return True
        for candidate in ancestors(path):
            group = self.groups.get(candidate)
            if group and group.administrators.longest_prefix_match(dn) is not None:
                return True
        return False

    # --- mutations ---

    def create_group(self, actor: str, path: str,
                     members: Iterable[str] = (),
                     administrators: Iterable[str] = ()) -> VoGroup:
        if not valid_group_path(path):
            raise ValueError(f"invalid group path {path!r}")
        with self._lock:
            if path in self.groups:
                raise DuplicateGroup(path)
            parent = ".".join(path.split(".")[:-1])
            if parent and parent not in self.groups:
                raise MissingParent(parent)
            if not self._may_govern_new(path, actor):
                raise NotAuthorized(f"{actor} may not create {path}")
            group = VoGroup(path, members, administrators)
            self._persist(group)
            self.groups[path] = group
            return group

    def delete_group(self, actor: str, path: str) -> None:
        with self._lock:
            if path == ADMINS_GROUP:
                raise ProtectedGroup(ADMINS_GROUP)
            if path not in self.groups:
                raise NoSuchGroup(path)
            if not self._may_govern_new(path, actor):
                raise NotAuthorized(f"{actor} may not delete {path}")
            doomed = [p for p in self.groups
                      if p == path or p.startswith(path + ".")]
            for p in doomed:
                self.store.delete(_KEY_PREFIX + p)
                del self.groups[p]

    def add_member(self, actor: str, path: str, dn: str) -> None:
        with self._lock:
            group = self.get_group(path)
            if not self.is_group_admin(path, actor):
                raise NotAuthorized(f"{actor} may not edit {path}")
            group._checked_insert(group.members, dn)
            self._persist(group)

    def remove_member(self, actor: str, path: str, dn: str) -> None:
        with self._lock:
            group = self.get_group(path)
            if not self.is_group_admin(path, actor):
                raise NotAuthorized(f"{actor} may not edit {path}")
            group.members.remove(dn)
            self._persist(group)

    def add_administrator(self, actor: str, path: str, dn: str) -> None:
        with self._lock:
            group = self.get_group(path)
            if not self.is_group_admin(path, actor):
                raise NotAuthorized(f"{actor} may not edit {path}")
            group._checked_insert(group.administrators, dn)
            self._persist(group)

    def remove_administrator(self, actor: str, path: str, dn: str) -> None:
        with self._lock:
            group = self.get_group(path)
            if not self.is_group_admin(path, actor):
                raise NotAuthorized(f"{actor} may not edit {path}")
            group.administrators.remove(dn)
            self._persist(group)
