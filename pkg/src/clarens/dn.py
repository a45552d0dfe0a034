"""Slash-form distinguished names (/C=../O=../OU=../CN=..)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import MalformedDn

# Attribute keys in the order certificates commonly carry them.
ATTR_KEYS = ("C", "ST", "L", "O", "OU", "CN", "Email")

# A new segment starts at "/<known-key>=".  Values may themselves contain
# slashes (e.g. CN=host /www.mysite.edu), so a plain split on "/" is wrong.
_SEGMENT_RE = re.compile(r"/(?=(?:%s)=)" % "|".join(ATTR_KEYS))

ANONYMOUS_DN = "/anonymous"


@dataclass(frozen=True)
class DistinguishedName:
    """Ordered attribute view of a slash-form DN string.

    ``raw`` round-trips byte-for-byte: joining the parsed (key, value) pairs
    back into /key=value segments reproduces the input exactly.
    """

    raw: str
    attributes: tuple[tuple[str, str], ...] = field(default=())

    @classmethod
    def parse(cls, raw: str) -> "DistinguishedName":
        if not raw.startswith("/") or len(raw) < 2:
            raise MalformedDn(f"not a slash-form DN: {raw!r}")
        attrs = []
        for segment in _SEGMENT_RE.split(raw):
            if not segment:
                continue
            key, sep, value = segment.partition("=")
            if not sep or key not in ATTR_KEYS or not value:
                raise MalformedDn(f"bad DN segment {segment!r} in {raw!r}")
            attrs.append((key, value))
        if not attrs:
            raise MalformedDn(f"no attributes in {raw!r}")
        dn = cls(raw=raw, attributes=tuple(attrs))
        if dn.serialize() != raw:
            raise MalformedDn(f"DN does not round-trip: {raw!r}")
        return dn

    def serialize(self) -> str:
        return "".join(f"/{k}={v}" for k, v in self.attributes)

    def _first(self, key: str) -> Optional[str]:
        for k, v in self.attributes:
            if k == key:
                return v
        return None

    @property
    def country(self):
        return self._first("C")

    @property
    def state(self):
        return self._first("ST")

    @property
    def locality(self):
        return self._first("L")

    @property
    def organization(self):
        return self._first("O")

    @property
    def organizational_unit(self):
        return self._first("OU")

    @property
    def common_name(self):
        return self._first("CN")

    @property
    def email(self):
        return self._first("Email")

    def __str__(self) -> str:
        return self.raw


def is_dn_shaped(entry: str) -> bool:
    """True for full DNs and initial DN fragments (anything rooted at "/")."""
    return isinstance(entry, str) and entry.startswith("/") and len(entry) > 1
