import random

import pytest

from clarens.acl import (
    AccessControlList,
    AclOrder,
    AclStore,
    Verdict,
    evaluate_level,
    method_prefixes,
)
from clarens.errors import DenyListForbidden, MalformedMethodName
from clarens.store import MemoryKvStore
from clarens.vo import VoRegistry

ADMIN = "/O=grid/OU=People/CN=Root Admin"
JOHN = "/O=doesg.org/OU=People/CN=John Smith"
NG = "/O=doesg.org/OU=People/CN=Ng Siong"
OLD = "/O=olduni/OU=physics/CN=Old Account"
ED = "/O=Caltech/OU=CACR/CN=Ed Peng"
CALTECH_USER = "/O=caltech.edu/OU=People/CN=Caltech User"
UFL_USER = "/O=ufl.edu/OU=People/CN=UFL User"
FNAL_USER = "/O=fnal.gov/OU=People/CN=Fermilab User"
CRACKER = "/O=darknet/OU=People/CN=Evil One"


def table1_world():
    """The two published example ACLs plus the VO tree they refer to."""
    registry = VoRegistry.bootstrap([ADMIN])
    registry.create_group(ADMIN, "CMS")
    registry.create_group(ADMIN, "CMS.USA", members=[FNAL_USER])
    registry.create_group(ADMIN, "CMS.CERN", members=[ED])
    registry.create_group(ADMIN, "CMS.USA.Caltech", members=[CALTECH_USER])
    registry.create_group(ADMIN, "CMS.USA.UFL", members=[UFL_USER])
    registry.create_group(ADMIN, "crackers", members=[CRACKER])
    acls = AclStore()
    acls.set_method_acl("mod", AccessControlList(
        order=AclOrder.DENY_THEN_ALLOW,
        allow_dns=[JOHN, NG],
        allow_groups=["CMS.USA", "CMS.CERN"],
        deny_dns=[OLD],
        deny_groups=["crackers"]))
    acls.set_method_acl("mod.meth", AccessControlList(
        order=AclOrder.DENY_THEN_ALLOW,
        allow_groups=["CMS.USA.Caltech", "CMS.USA.UFL"],
        deny_dns=[ED]))
    return registry, acls


def test_method_prefixes():
    assert method_prefixes("mod.meth") == ["mod.meth", "mod"]
    assert method_prefixes("a.b.c") == ["a.b.c", "a.b", "a"]
    assert method_prefixes("~alice.tools.run") == \
        ["~alice.tools.run", "~alice.tools", "~alice"]
    for bad in ("", ".", "a..b", "a.", "mod meth", "a\tb"):
        with pytest.raises(MalformedMethodName):
            method_prefixes(bad)


def test_decision_matrix():
    registry, acls = table1_world()

    def check(dn, method):
        return acls.check_method_access(method, dn, registry)

    d = check(JOHN, "mod.anything")
    assert (d.verdict, d.decided_at) == (Verdict.ALLOW, "mod")
    d = check(NG, "mod.anything")
    assert (d.verdict, d.decided_at) == (Verdict.ALLOW, "mod")
    d = check(CRACKER, "mod.anything")
    assert (d.verdict, d.decided_at) == (Verdict.DENY, "mod")
    d = check(ED, "mod.meth")
    assert (d.verdict, d.decided_at) == (Verdict.DENY, "mod.meth")
    d = check(CALTECH_USER, "mod.meth")
    assert (d.verdict, d.decided_at) == (Verdict.ALLOW, "mod.meth")
    # A CMS.USA member inherits into the subgroups, so the mod.meth
    # level already allows; the verdict is the same either way.
    d = check(FNAL_USER, "mod.meth")
    assert d.verdict is Verdict.ALLOW
    d = check(CALTECH_USER, "mod.other")
    assert (d.verdict, d.decided_at) == (Verdict.DENY, None)


def test_old_account_denied_at_mod():
    registry, acls = table1_world()
    d = acls.check_method_access("mod.other", OLD, registry)
    assert (d.verdict, d.decided_at) == (Verdict.DENY, "mod")


def test_default_deny_without_acls():
    registry = VoRegistry.bootstrap([ADMIN])
    acls = AclStore()
    d = acls.check_method_access("any.method", JOHN, registry)
    assert (d.verdict, d.decided_at) == (Verdict.DENY, None)


def test_evaluate_level_order_semantics():
    registry = VoRegistry.bootstrap([ADMIN])
    both = dict(allow_dns=[JOHN], deny_dns=[JOHN])
    # Second-named list wins a double match.
    acl = AccessControlList(order=AclOrder.DENY_THEN_ALLOW, **both)
    assert evaluate_level(acl, JOHN, registry).verdict is Verdict.ALLOW
    acl = AccessControlList(order=AclOrder.ALLOW_THEN_DENY, **both)
    assert evaluate_level(acl, JOHN, registry).verdict is Verdict.DENY
    acl = AccessControlList(allow_dns=[NG], deny_dns=[OLD])
    assert evaluate_level(acl, JOHN, registry).verdict is Verdict.UNDECIDED


def test_deny_at_lower_level_overrides_higher_allow():
    registry, acls = table1_world()
    # Ed Peng is a CMS.CERN member, allowed at "mod", denied below.
    d = acls.check_method_access("mod.other", ED, registry)
    assert d.verdict is Verdict.ALLOW
    d = acls.check_method_access("mod.meth", ED, registry)
    assert (d.verdict, d.decided_at) == (Verdict.DENY, "mod.meth")


def test_dn_prefix_entries_in_acl():
    registry = VoRegistry.bootstrap([ADMIN])
    acls = AclStore()
    acls.set_method_acl("mod", AccessControlList(
        allow_dns=["/O=doesg.org/OU=People"]))
    assert acls.check_method_access("mod.x", JOHN, registry).verdict \
        is Verdict.ALLOW
    assert acls.check_method_access("mod.x", ED, registry).verdict \
        is Verdict.DENY


def test_acl_record_round_trip():
    _, acls = table1_world()
    for prefix in ("mod", "mod.meth"):
        acl = acls.get_method_acl(prefix)
        assert AccessControlList.from_record(acl.to_record()).to_record() \
            == acl.to_record()


def test_acl_store_persistence():
    store = MemoryKvStore()
    acls = AclStore(store)
    acls.set_method_acl("mod", AccessControlList(allow_dns=[JOHN]))
    acls.set_user_mapping("cmsuser", AccessControlList(allow_dns=[JOHN]))
    reloaded = AclStore.load(store)
    assert reloaded.get_method_acl("mod").to_record() == \
        acls.get_method_acl("mod").to_record()
    assert reloaded.get_user_mapping("cmsuser") is not None


def test_set_method_acl_validates_name():
    acls = AclStore()
    with pytest.raises(MalformedMethodName):
        acls.set_method_acl("bad..name", AccessControlList())


def test_user_mapping_deny_forbidden():
    acls = AclStore()
    with pytest.raises(DenyListForbidden):
        acls.set_user_mapping("u", AccessControlList(deny_dns=[OLD]))
    with pytest.raises(DenyListForbidden):
        acls.set_user_mapping("u", AccessControlList(deny_groups=["crackers"]))


def test_map_user_basic():
    registry = VoRegistry.bootstrap([ADMIN])
    acls = AclStore()
    acls.set_user_mapping("cmsuser", AccessControlList(
        allow_dns=["/O=doesciencegrid.org/OU=People"]))
    dn = "/O=doesciencegrid.org/OU=People/CN=John Smith 12345"
    assert acls.map_user(dn, registry) == "cmsuser"
    assert acls.map_user(ED, registry) is None


def test_map_user_tie_breaks():
    registry = VoRegistry.bootstrap([ADMIN])
    acls = AclStore()
    acls.set_user_mapping("broad", AccessControlList(
        allow_dns=["/O=doesg.org"]))
    acls.set_user_mapping("narrow", AccessControlList(
        allow_dns=["/O=doesg.org/OU=People"]))
    assert acls.map_user(JOHN, registry) == "narrow"
    # Equal match lengths: lexicographically smallest username wins.
    acls.set_user_mapping("narrow2", AccessControlList(
        allow_dns=["/O=doesg.org/OU=People"]))
    assert acls.map_user(JOHN, registry) == "narrow"


def test_map_user_group_only_match_scores_zero():
    registry = VoRegistry.bootstrap([ADMIN])
    registry.create_group(ADMIN, "CMS", members=[JOHN])
    acls = AclStore()
    acls.set_user_mapping("groupuser", AccessControlList(allow_groups=["CMS"]))
    acls.set_user_mapping("dnuser", AccessControlList(allow_dns=["/O=doesg.org"]))
    assert acls.map_user(JOHN, registry) == "dnuser"


def brute_force_check(levels, dn, method, member_of):
    """Tree-free oracle over plain lists with explicit order handling."""
    parts = method.split(".")
    for i in range(len(parts), 0, -1):
        prefix = ".".join(parts[:i])
        if prefix not in levels:
            continue
        order, allow_dns, allow_groups, deny_dns, deny_groups = levels[prefix]
        allowed = (any(dn.startswith(a) for a in allow_dns)
                   or any(member_of(g, dn) for g in allow_groups))
        denied = (any(dn.startswith(a) for a in deny_dns)
                  or any(member_of(g, dn) for g in deny_groups))
        if order == "deny,allow":
            if allowed:
                return "allow"
            if denied:
                return "deny"
        else:
            if denied:
                return "deny"
            if allowed:
                return "allow"
    return "deny"


def test_random_store_matches_oracle():
    rng = random.Random(23)
    registry = VoRegistry.bootstrap([ADMIN])
    registry.create_group(ADMIN, "CMS")
    registry.create_group(ADMIN, "CMS.USA", members=[FNAL_USER])
    registry.create_group(ADMIN, "crackers", members=[CRACKER])
    dns = [JOHN, NG, OLD, ED, FNAL_USER, CRACKER, "/O=doesg.org/OU=Hosts/CN=web"]
    groups = ["CMS", "CMS.USA", "crackers"]
    prefixes = ["mod", "mod.meth", "mod.meth.sub", "other", "other.x"]
    for _ in range(40):
        acls = AclStore()
        levels = {}
        for prefix in prefixes:
            if rng.random() < 0.4:
                continue
            order = rng.choice(["deny,allow", "allow,deny"])
            pick = lambda pool: rng.sample(pool, rng.randrange(0, 3))
            spec = (order, pick(dns), pick(groups), pick(dns), pick(groups))
            levels[prefix] = spec
            acls.set_method_acl(prefix, AccessControlList(
                order=AclOrder(order), allow_dns=spec[1], allow_groups=spec[2],
                deny_dns=spec[3], deny_groups=spec[4]))
        for method in ["mod.meth.sub.deep", "mod.meth", "mod.zz", "other.x.y",
                       "unlisted.m"]:
            for dn in dns:
                expected = brute_force_check(levels, dn, method,
                                             registry.is_member)
                got = acls.check_method_access(method, dn, registry)
                assert got.verdict.value == expected, (levels, dn, method)
