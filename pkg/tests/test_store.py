import base64

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarens.errors import CorruptRecord, StorageFailure
from clarens.store import FileKvStore, MemoryKvStore


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    if request.param == "memory":
        s = MemoryKvStore()
    else:
        s = FileKvStore(str(tmp_path / "kv"))
    yield s
    s.close()


def test_put_get_delete(store):
    store.put("session/abc", b"hello")
    assert store.get("session/abc") == b"hello"
    store.put("session/abc", b"hello2")
    assert store.get("session/abc") == b"hello2"
    store.delete("session/abc")
    assert store.get("session/abc") is None


def test_get_missing(store):
    assert store.get("nope") is None
    store.delete("nope")  # no error


def test_empty_key_rejected(store):
    with pytest.raises(StorageFailure):
        store.put("", b"x")


def test_scan_prefix_sorted(store):
    store.put("vo/CMS", b"1")
    store.put("vo/CMS.USA", b"2")
    store.put("acl/method/mod", b"3")
    assert store.scan("vo/") == [(b"vo/CMS", b"1"), (b"vo/CMS.USA", b"2")]
    assert store.scan("") == sorted(store.scan(""))
    assert store.scan("zzz") == []


def test_reopen_preserves_acknowledged_writes(tmp_path):
    root = str(tmp_path / "kv")
    s1 = FileKvStore(root)
    s1.put("a", b"1")
    s1.put("b", b"2")
    s1.delete("a")
    s1.put("b", b"3")
    # Deliberately no close(): an acknowledged put must not depend on it.
    s2 = FileKvStore(root)
    assert s2.get("a") is None
    assert s2.get("b") == b"3"
    s2.close()


def test_torn_tail_dropped(tmp_path):
    root = str(tmp_path / "kv")
    s1 = FileKvStore(root)
    s1.put("a", b"1")
    s1.put("b", b"2")
    s1.close()
    log = tmp_path / "kv" / "wal.log"
    data = log.read_bytes()
    log.write_bytes(data + b"1\tput\t" + base64.b64encode(b"c"))  # no newline
    s2 = FileKvStore(root)
    assert s2.get("a") == b"1"
    assert s2.get("b") == b"2"
    assert s2.get("c") is None
    s2.put("c", b"3")
    s2.close()
    s3 = FileKvStore(root)
    assert s3.get("c") == b"3"
    s3.close()


def test_corrupt_interior_record_raises(tmp_path):
    root = str(tmp_path / "kv")
    s1 = FileKvStore(root)
    s1.put("a", b"1")
    s1.close()
    log = tmp_path / "kv" / "wal.log"
    log.write_bytes(b"garbage line\n" + log.read_bytes())
    with pytest.raises(CorruptRecord):
        FileKvStore(root)


def test_binary_keys_and_values(tmp_path):
    root = str(tmp_path / "kv")
    s1 = FileKvStore(root)
    key = b"k\tab\nc"
    value = bytes(range(256))
    s1.put(key, value)
    s1.close()
    s2 = FileKvStore(root)
    assert s2.get(key) == value
    s2.close()


def test_compact_shrinks_and_preserves(tmp_path):
    root = str(tmp_path / "kv")
    s = FileKvStore(root)
    for i in range(50):
        s.put("hot", str(i).encode())
    before = (tmp_path / "kv" / "wal.log").stat().st_size
    s.compact()
    after = (tmp_path / "kv" / "wal.log").stat().st_size
    assert after < before
    assert s.get("hot") == b"49"
    s.put("cold", b"x")
    s.close()
    s2 = FileKvStore(root)
    assert s2.get("hot") == b"49"
    assert s2.get("cold") == b"x"
    s2.close()


def test_export_import_round_trip(tmp_path):
    src = FileKvStore(str(tmp_path / "src"))
    src.put("vo/CMS", b"{}")
    src.put("session/x", bytes(range(32)))
    dump = list(src.export_records())
    src.close()
    dst = FileKvStore(str(tmp_path / "dst"))
    assert dst.import_records(dump) == 2
    assert dst.scan("") == [(b"session/x", bytes(range(32))), (b"vo/CMS", b"{}")]
    dst.close()


def test_import_rejects_garbage(tmp_path):
    dst = FileKvStore(str(tmp_path / "dst"))
    with pytest.raises(CorruptRecord):
        dst.import_records(["not a record"])
    dst.close()


@settings(max_examples=50)
@given(ops=st.lists(st.tuples(st.sampled_from(["put", "del"]),
                              st.text(min_size=1, max_size=6),
                              st.binary(max_size=8)),
                    max_size=25))
def test_replay_matches_dict_model(tmp_path_factory, ops):
    root = str(tmp_path_factory.mktemp("kv"))
    model = {}
    s = FileKvStore(root, sync=False)
    for op, key, value in ops:
        if op == "put":
            s.put(key, value)
            model[key.encode()] = value
        else:
            s.delete(key)
            model.pop(key.encode(), None)
    s.close()
    s2 = FileKvStore(root)
    assert dict(s2.scan("")) == model
    s2.close()
