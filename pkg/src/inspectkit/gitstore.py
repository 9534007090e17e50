"""Content-addressed object store: blobs, trees, commits, and named refs
with compare-and-swap updates.

Object digests are SHA-256 over a canonical encoding, so they depend only
on content, never on the store instance:

    blob    b"blob <len>\\0" + data
    tree    b"tree <len>\\0" + one line per entry, sorted by name:
            "<mode> <digest> <name>\\n"
    commit  b"commit <len>\\0" + text:
            "tree <digest>\\n" ("parent <digest>\\n")* "author <author>\\n"
            "timestamp <unix>\\n" "\\n" <message>

Two backends ship: an in-memory store (tests, simulations) and a
directory-backed store (the on-disk image repository next to a corpus).
Ref updates are compare-and-swap everywhere: callers supply the digest they
believe the ref points at and the update fails if the ref moved.
"""

from __future__ import annotations

import fcntl
import hashlib
import os
import threading
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

BLOB_MODE = "100644"
TREE_MODE = "040000"


class MissingObjectError(KeyError):
    """A digest was referenced that the store does not contain."""


class RefConflictError(RuntimeError):
    """Compare-and-swap failed: the ref moved since it was read."""


class ObjectFormatError(ValueError):
    """Stored bytes do not decode as the expected object kind."""


@dataclass(frozen=True)
class Commit:
    tree: str
    parents: tuple[str, ...]
    author: str
    message: str
    timestamp: int


def _frame(kind: str, payload: bytes) -> bytes:
    return b"%s %d\x00%s" % (kind.encode("ascii"), len(payload), payload)


def encode_blob(data: bytes) -> bytes:
    return _frame("blob", data)


def encode_tree(entries: Mapping[str, tuple[str, str]]) -> bytes:
    """Entries map name -> (mode, digest). Names are single path components."""
    lines = []
    for name in sorted(entries):
        if not name or "/" in name or "\n" in name:
            raise ValueError(f"bad tree entry name: {name!r}")
        mode, digest = entries[name]
        if mode not in (BLOB_MODE, TREE_MODE):
            raise ValueError(f"bad tree entry mode: {mode!r}")
        lines.append(f"{mode} {digest} {name}\n")
    return _frame("tree", "".join(lines).encode("utf-8"))


def encode_commit(commit: Commit) -> bytes:
    if "\n" in commit.author:
        raise ValueError("author must be a single line")
    text = f"tree {commit.tree}\n"
    for parent in commit.parents:
        text += f"parent {parent}\n"
    text += f"author {commit.author}\n"
    text += f"timestamp {commit.timestamp}\n"
    text += "\n" + commit.message
    return _frame("commit", text.encode("utf-8"))


def object_digest(encoded: bytes) -> str:
    return hashlib.sha256(encoded).hexdigest()


def blob_digest(data: bytes) -> str:
    """Digest a blob's content without storing it anywhere."""
    return object_digest(encode_blob(data))


def _split(encoded: bytes) -> tuple[str, bytes]:
    header, sep, payload = encoded.partition(b"\x00")
    if not sep:
        raise ObjectFormatError("missing object header")
    kind, _, size = header.partition(b" ")
    if size.isdigit() is False or int(size) != len(payload):
        raise ObjectFormatError("corrupt object header")
    return kind.decode("ascii"), payload


def _decode_tree(payload: bytes) -> dict[str, tuple[str, str]]:
    entries: dict[str, tuple[str, str]] = {}
    for line in payload.decode("utf-8").splitlines():
        mode, digest, name = line.split(" ", 2)
        entries[name] = (mode, digest)
    return entries


def _decode_commit(payload: bytes) -> Commit:
    head, _, message = payload.decode("utf-8").partition("\n\n")
    tree = ""
    parents: list[str] = []
    author = ""
    timestamp = 0
    for line in head.splitlines():
        key, _, value = line.partition(" ")
        if key == "tree":
            tree = value
        elif key == "parent":
            parents.append(value)
        elif key == "author":
            author = value
        elif key == "timestamp":
            timestamp = int(value)
    if not tree:
        raise ObjectFormatError("commit without tree")
    return Commit(tree=tree, parents=tuple(parents), author=author, message=message, timestamp=timestamp)


class GitObjectStore:
    """Shared object/ref logic over an abstract byte backend.

    Subclasses provide raw digest->bytes storage plus ref read/CAS; all
    validation (trees reference only existing digests, commits reference an
    existing tree and parents) lives here.
    """

    # -- backend hooks -------------------------------------------------

    def _read(self, digest: str) -> Optional[bytes]:
        raise NotImplementedError

    def _write(self, digest: str, encoded: bytes) -> None:
        raise NotImplementedError

    def read_ref(self, name: str) -> Optional[str]:
        raise NotImplementedError

    def cas_ref(self, name: str, expected_old: Optional[str], new: str) -> None:
        """Point ``name`` at ``new`` iff it currently equals ``expected_old``
        (None = ref must not exist). Raises RefConflictError otherwise."""
        raise NotImplementedError

    def list_refs(self) -> dict[str, str]:
        raise NotImplementedError

    # -- object API ----------------------------------------------------

    def contains(self, digest: str) -> bool:
        return self._read(digest) is not None

    def _kind(self, digest: str) -> str:
        encoded = self._read(digest)
        if encoded is None:
            raise MissingObjectError(digest)
        return _split(encoded)[0]

    def _store(self, encoded: bytes) -> str:
        digest = object_digest(encoded)
        if self._read(digest) is None:
            self._write(digest, encoded)
        return digest

    def put_blob(self, data: bytes) -> str:
        if not isinstance(data, (bytes, bytearray)):
            raise TypeError("blob content must be bytes")
        return self._store(encode_blob(bytes(data)))

    def put_tree(self, entries: Mapping[str, tuple[str, str]]) -> str:
        encoded = encode_tree(entries)
        for name, (mode, digest) in entries.items():
            kind = self._kind(digest)  # raises MissingObjectError
            expected = "tree" if mode == TREE_MODE else "blob"
            if kind != expected:
                raise ObjectFormatError(f"entry {name!r} points at a {kind}, mode says {expected}")
        return self._store(encoded)

    def put_commit(
        self,
        tree: str,
        parents: tuple[str, ...] | list[str],
        author: str,
        message: str,
        timestamp: int,
    ) -> str:
        if self._kind(tree) != "tree":
            raise ObjectFormatError("commit tree digest is not a tree")
        for parent in parents:
            if self._kind(parent) != "commit":
                raise ObjectFormatError("commit parent digest is not a commit")
        commit = Commit(tree=tree, parents=tuple(parents), author=author, message=message, timestamp=timestamp)
        return self._store(encode_commit(commit))

    def _get(self, digest: str, kind: str) -> bytes:
        encoded = self._read(digest)
        if encoded is None:
            raise MissingObjectError(digest)
        actual, payload = _split(encoded)
        if actual != kind:
            raise ObjectFormatError(f"expected {kind}, found {actual}")
        return payload

    def get_blob(self, digest: str) -> bytes:
        return self._get(digest, "blob")

    def get_tree(self, digest: str) -> dict[str, tuple[str, str]]:
        return _decode_tree(self._get(digest, "tree"))

    def get_commit(self, digest: str) -> Commit:
        return _decode_commit(self._get(digest, "commit"))


class MemoryObjectStore(GitObjectStore):
    """Linearizable in-memory store; ref ops serialize through one lock."""

    def __init__(self) -> None:
        self._objects: dict[str, bytes] = {}
        self._refs: dict[str, str] = {}
        self._ref_lock = threading.Lock()

    def _read(self, digest: str) -> Optional[bytes]:
        return self._objects.get(digest)

    def _write(self, digest: str, encoded: bytes) -> None:
        self._objects[digest] = encoded

    def read_ref(self, name: str) -> Optional[str]:
        with self._ref_lock:
            return self._refs.get(name)

    def cas_ref(self, name: str, expected_old: Optional[str], new: str) -> None:
        with self._ref_lock:
            current = self._refs.get(name)
            if current != expected_old:
                raise RefConflictError(f"{name}: expected {expected_old}, found {current}")
            self._refs[name] = new

    def list_refs(self) -> dict[str, str]:
        with self._ref_lock:
            return dict(self._refs)


class FileObjectStore(GitObjectStore):
    """Directory-backed store: objects/<d2>/<rest> files plus refs/ files.

    Ref compare-and-swap takes an advisory flock on refs.lock, so concurrent
    processes cannot interleave read-modify-write on the same ref.
    """

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = os.fspath(root)
        os.makedirs(os.path.join(self.root, "objects"), exist_ok=True)
        os.makedirs(os.path.join(self.root, "refs"), exist_ok=True)

    def _object_path(self, digest: str) -> str:
        return os.path.join(self.root, "objects", digest[:2], digest[2:])

    def _read(self, digest: str) -> Optional[bytes]:
        try:
            with open(self._object_path(digest), "rb") as fh:
                return fh.read()
        except FileNotFoundError:
            return None

    def _write(self, digest: str, encoded: bytes) -> None:
        path = self._object_path(digest)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(encoded)
        os.replace(tmp, path)

    def _ref_path(self, name: str) -> str:
        safe = name.replace("/", "%2F")
        return os.path.join(self.root, "refs", safe)

    def _locked(self):
        lock_path = os.path.join(self.root, "refs.lock")
        fh = open(lock_path, "a+")
        fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
        return fh

    def read_ref(self, name: str) -> Optional[str]:
        try:
            with open(self._ref_path(name), "r", encoding="ascii") as fh:
                return fh.read().strip() or None
        except FileNotFoundError:
            return None

    def cas_ref(self, name: str, expected_old: Optional[str], new: str) -> None:
        lock = self._locked()
        try:
            current = self.read_ref(name)
            if current != expected_old:
                raise RefConflictError(f"{name}: expected {expected_old}, found {current}")
            path = self._ref_path(name)
            tmp = path + ".tmp"
            with open(tmp, "w", encoding="ascii") as fh:
                fh.write(new + "\n")
            os.replace(tmp, path)
        finally:
            fcntl.flock(lock.fileno(), fcntl.LOCK_UN)
            lock.close()

    def list_refs(self) -> dict[str, str]:
        refs: dict[str, str] = {}
        refs_dir = os.path.join(self.root, "refs")
        for entry in os.listdir(refs_dir):
            name = entry.replace("%2F", "/")
            target = self.read_ref(name)
            if target:
                refs[name] = target
        return refs


# -- path helpers over nested trees -------------------------------------


def split_path(path: str) -> list[str]:
    parts = [p for p in path.split("/") if p]
    if not parts:
        raise ValueError("empty path")
    return parts


def upsert_path(
    store: GitObjectStore, tree_digest: Optional[str], path: str, blob: str
) -> str:
    """Return the digest of ``tree_digest`` with ``path`` upserted to ``blob``.

    Missing intermediate trees are created; existing siblings are kept.
    A None base tree means "start from an empty tree".
    """
    return _upsert(store, tree_digest, split_path(path), blob)


def _upsert(store: GitObjectStore, tree_digest: Optional[str], parts: list[str], blob: str) -> str:
    entries = store.get_tree(tree_digest) if tree_digest is not None else {}
    name = parts[0]
    if len(parts) == 1:
        entries[name] = (BLOB_MODE, blob)
    else:
        existing = entries.get(name)
        child = existing[1] if existing is not None and existing[0] == TREE_MODE else None
        entries[name] = (TREE_MODE, _upsert(store, child, parts[1:], blob))
    return store.put_tree(entries)


def resolve_path(store: GitObjectStore, tree_digest: str, path: str) -> Optional[str]:
    """Walk nested trees; return the blob digest at ``path`` or None."""
    digest = tree_digest
    parts = split_path(path)
    for i, name in enumerate(parts):
        entries = store.get_tree(digest)
        entry = entries.get(name)
        if entry is None:
            return None
        mode, digest = entry
        last = i == len(parts) - 1
        if last and mode != BLOB_MODE:
            return None
        if not last and mode != TREE_MODE:
            return None
    return digest


def ref_history(store: GitObjectStore, ref_name: str) -> list[str]:
    """Commit digests from the ref head back to the root, head first."""
    history: list[str] = []
    digest = store.read_ref(ref_name)
    while digest is not None:
        history.append(digest)
        parents = store.get_commit(digest).parents
        digest = parents[0] if parents else None
    return history


def iter_tree_blobs(store: GitObjectStore, tree_digest: str, prefix: str = "") -> Iterator[tuple[str, str]]:
    """Yield (path, blob digest) pairs for every blob under a tree."""
    for name, (mode, digest) in sorted(store.get_tree(tree_digest).items()):
        path = f"{prefix}{name}"
        if mode == BLOB_MODE:
            yield path, digest
        else:
            yield from iter_tree_blobs(store, digest, prefix=path + "/")
