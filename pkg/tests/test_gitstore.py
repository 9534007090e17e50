from __future__ import annotations

import hashlib
import random

import pytest
from hypothesis import given, strategies as st

from inspectkit import gitstore
from inspectkit.bridge import publish_image
from inspectkit.gitstore import (
    FileObjectStore,
    MemoryObjectStore,
    MissingObjectError,
    ObjectFormatError,
    RefConflictError,
    blob_digest,
    iter_tree_blobs,
    ref_history,
    resolve_path,
    upsert_path,
)


def oracle_blob_digest(data: bytes) -> str:
    """Independent digest implementation: header + payload, straight hashlib."""
    return hashlib.sha256(b"blob %d\x00%s" % (len(data), data)).hexdigest()


def oracle_tree_digest(entries: dict[str, tuple[str, str]]) -> str:
    body = "".join(
        f"{mode} {digest} {name}\n" for name, (mode, digest) in sorted(entries.items())
    ).encode("utf-8")
    return hashlib.sha256(b"tree %d\x00%s" % (len(body), body)).hexdigest()


@pytest.fixture(params=["memory", "file"])
def store(request, tmp_path):
    if request.param == "memory":
        return MemoryObjectStore()
    return FileObjectStore(tmp_path / "objects")


class TestObjects:
    def test_blob_digest_matches_oracle(self, store):
        data = b"PNG-ish bytes \x89\x00\xff"
        digest = store.put_blob(data)
        assert digest == oracle_blob_digest(data)
        assert store.get_blob(digest) == data

    def test_same_bytes_same_digest(self, store):
        assert store.put_blob(b"hello") == store.put_blob(b"hello")

    def test_blob_digest_is_store_independent(self):
        a, b = MemoryObjectStore(), MemoryObjectStore()
        assert a.put_blob(b"xyz") == b.put_blob(b"xyz") == blob_digest(b"xyz")

    def test_tree_digest_matches_oracle(self, store):
        blob = store.put_blob(b"content")
        entries = {"a.png": (gitstore.BLOB_MODE, blob)}
        assert store.put_tree(entries) == oracle_tree_digest(entries)

    def test_tree_rejects_missing_digest(self, store):
        with pytest.raises(MissingObjectError):
            store.put_tree({"a": (gitstore.BLOB_MODE, "0" * 64)})

    def test_tree_rejects_kind_mismatch(self, store):
        blob = store.put_blob(b"x")
        with pytest.raises(ObjectFormatError):
            store.put_tree({"a": (gitstore.TREE_MODE, blob)})

    def test_commit_requires_existing_tree_and_parents(self, store):
        blob = store.put_blob(b"x")
        tree = store.put_tree({"a": (gitstore.BLOB_MODE, blob)})
        with pytest.raises(ObjectFormatError):
            store.put_commit(blob, (), "me", "msg", 0)
        with pytest.raises(MissingObjectError):
            store.put_commit(tree, ("0" * 64,), "me", "msg", 0)
        commit = store.put_commit(tree, (), "me", "msg", 7)
        loaded = store.get_commit(commit)
        assert loaded.tree == tree
        assert loaded.parents == ()
        assert loaded.timestamp == 7
        assert loaded.message == "msg"

    def test_get_blob_type_checked(self, store):
        blob = store.put_blob(b"x")
        tree = store.put_tree({"a": (gitstore.BLOB_MODE, blob)})
        with pytest.raises(ObjectFormatError):
            store.get_blob(tree)


@given(st.binary(max_size=512))
def test_content_addressing_property(data):
    # digest depends only on the bytes, checked against the oracle
    assert MemoryObjectStore().put_blob(data) == oracle_blob_digest(data)


class TestRefs:
    def test_cas_create_and_update(self, store):
        blob = store.put_blob(b"x")
        tree = store.put_tree({"a": (gitstore.BLOB_MODE, blob)})
        c1 = store.put_commit(tree, (), "me", "one", 1)
        c2 = store.put_commit(tree, (c1,), "me", "two", 2)
        assert store.read_ref("refs/heads/img") is None
        store.cas_ref("refs/heads/img", None, c1)
        assert store.read_ref("refs/heads/img") == c1
        store.cas_ref("refs/heads/img", c1, c2)
        assert store.read_ref("refs/heads/img") == c2

    def test_cas_conflict(self, store):
        blob = store.put_blob(b"x")
        tree = store.put_tree({"a": (gitstore.BLOB_MODE, blob)})
        c1 = store.put_commit(tree, (), "me", "one", 1)
        store.cas_ref("refs/heads/img", None, c1)
        with pytest.raises(RefConflictError):
            store.cas_ref("refs/heads/img", None, c1)
        with pytest.raises(RefConflictError):
            store.cas_ref("refs/heads/img", "f" * 64, c1)


class TestPaths:
    def test_upsert_and_resolve_nested(self, store):
        b1 = store.put_blob(b"one")
        b2 = store.put_blob(b"two")
        t1 = upsert_path(store, None, "images/pr7/c1.png", b1)
        t2 = upsert_path(store, t1, "images/pr7/c2.png", b2)
        assert resolve_path(store, t2, "images/pr7/c1.png") == b1
        assert resolve_path(store, t2, "images/pr7/c2.png") == b2
        assert resolve_path(store, t2, "images/pr7/nope.png") is None
        assert resolve_path(store, t2, "images") is None  # tree, not blob
        assert dict(iter_tree_blobs(store, t2)) == {
            "images/pr7/c1.png": b1,
            "images/pr7/c2.png": b2,
        }

    def test_upsert_keeps_siblings(self, store):
        b1 = store.put_blob(b"one")
        b2 = store.put_blob(b"two")
        t1 = upsert_path(store, None, "a/x.png", b1)
        t2 = upsert_path(store, t1, "b/y.png", b2)
        assert resolve_path(store, t2, "a/x.png") == b1

    def test_empty_path_rejected(self, store):
        with pytest.raises(ValueError):
            upsert_path(store, None, "", "0" * 64)


class TestPublish:
    def test_publish_on_empty_history(self, store):
        data = b"fake png bytes"
        commit, blob = publish_image(
            store, "refs/heads/img", "images/pr7/c1.png", data, "add pin", timestamp=5
        )
        assert blob == oracle_blob_digest(data)
        head = store.read_ref("refs/heads/img")
        assert head == commit
        tree = store.get_commit(head).tree
        assert resolve_path(store, tree, "images/pr7/c1.png") == blob
        assert store.get_blob(blob) == data

    def test_same_bytes_two_paths_share_blob(self, store):
        data = b"shared"
        _, blob1 = publish_image(store, "refs/heads/img", "a/one.png", data, "m", timestamp=1)
        _, blob2 = publish_image(store, "refs/heads/img", "b/two.png", data, "m", timestamp=2)
        assert blob1 == blob2
        tree = store.get_commit(store.read_ref("refs/heads/img")).tree
        assert resolve_path(store, tree, "a/one.png") == blob1
        assert resolve_path(store, tree, "b/two.png") == blob1

    def test_retry_after_injected_conflict(self):
        store = ConflictInjectingStore(triggers=[True, False])
        publish_image(store, "refs/heads/img", "a.png", b"A", "m", timestamp=1)
        history = ref_history(store, "refs/heads/img")
        # the injected concurrent publish plus ours
        assert len(history) == 2
        tree = store.get_commit(history[0]).tree
        assert resolve_path(store, tree, "a.png") == oracle_blob_digest(b"A")
        assert resolve_path(store, tree, "intruder.png") is not None

    def test_cas_exhaustion_raises(self):
        store = AlwaysConflictStore()
        with pytest.raises(RefConflictError, match="gave up"):
            publish_image(store, "refs/heads/img", "a.png", b"A", "m", timestamp=1, max_retries=3)
        assert store.cas_attempts == 4  # initial try + 3 retries


class ConflictInjectingStore(MemoryObjectStore):
    """Moves the ref via a concurrent publish whenever a trigger fires,
    between the caller's ref read and its CAS."""

    def __init__(self, triggers):
        super().__init__()
        self.triggers = list(triggers)
        self._injecting = False

    def read_ref(self, name):
        head = super().read_ref(name)
        if not self._injecting and self.triggers and self.triggers.pop(0):
            self._injecting = True
            try:
                publish_image(self, name, "intruder.png", b"intruder", "concurrent", timestamp=99)
            finally:
                self._injecting = False
        return head


class AlwaysConflictStore(MemoryObjectStore):
    def __init__(self):
        super().__init__()
        self.cas_attempts = 0

    def cas_ref(self, name, expected_old, new):
        self.cas_attempts += 1
        raise RefConflictError("forced")


class RandomConflictStore(MemoryObjectStore):
    """With probability p, a concurrent actor publishes one pending item
    right after the caller reads the ref (forcing a CAS retry)."""

    def __init__(self, pending: list[tuple[str, bytes]], rng: random.Random, p: float = 0.3):
        super().__init__()
        self.pending = pending
        self.rng = rng
        self.p = p
        self._injecting = False

    def read_ref(self, name):
        head = super().read_ref(name)
        if not self._injecting and self.pending and self.rng.random() < self.p:
            self._injecting = True
            path, data = self.pending.pop()
            try:
                publish_image(self, name, path, data, "concurrent publish", timestamp=0)
            finally:
                self._injecting = False
        return head


def test_history_linear_under_randomized_conflicts():
    rng = random.Random(20240817)
    n = 120
    work = [(f"images/p/{i}.png", f"payload {i}".encode()) for i in range(n)]
    pending = list(work)
    store = RandomConflictStore(pending, rng)

    while pending:
        path, data = pending.pop()
        # generous retry budget: the injector is far more contentious than
        # the two-writer scenario the default of 3 is sized for
        publish_image(store, "refs/heads/img", path, data, "publish", timestamp=0, max_retries=50)

    history = ref_history(store, "refs/heads/img")
    assert len(history) == n
    # linear: every commit has exactly one parent except the root
    for digest in history[:-1]:
        assert len(store.get_commit(digest).parents) == 1
    assert store.get_commit(history[-1]).parents == ()
    # every byte string retrievable bit-exact via its oracle digest
    tree = store.get_commit(history[0]).tree
    for path, data in work:
        blob = resolve_path(store, tree, path)
        assert blob == oracle_blob_digest(data)
        assert store.get_blob(blob) == data
