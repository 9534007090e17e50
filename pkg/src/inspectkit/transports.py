"""Transports for the two comment platforms.

Every transport comes in two flavours behind the same duck-typed surface:
a fixture transport reading a directory of JSON files (tests, offline use)
and a live HTTP transport (optional at runtime, excluded from the test
surface). Fixture layout:

    <root>/project/<id>/comments.json        design-tool comments
    <root>/project/<id>/frames/<frame>.png   frame screenshots
    <root>/repo/<name>/pr/<n>/comments.json  pull-request conversation

Credentials for the live transports come from the environment:
BRIDGE_DESIGN_TOKEN and BRIDGE_CODEHOST_TOKEN.
"""

from __future__ import annotations

import io
import json
import os
from datetime import datetime, timezone
from typing import Callable, Optional
from urllib.parse import quote

from PIL import Image

DESIGN_TOKEN_VAR = "BRIDGE_DESIGN_TOKEN"
CODEHOST_TOKEN_VAR = "BRIDGE_CODEHOST_TOKEN"


class TransportError(RuntimeError):
    """The remote side (or fixture directory) could not be reached/read."""


class ProjectNotFoundError(TransportError):
    pass


class PRNotFoundError(TransportError):
    pass


class FrameImageMissingError(TransportError):
    pass


def _read_json(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise TransportError(f"unreadable fixture {path}: {exc}") from exc


def write_json(path: str, payload) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


class FixtureDesignTransport:
    """Design-tool API stand-in backed by a fixture directory."""

    def __init__(self, root: str | os.PathLike[str]) -> None:
        self.root = os.fspath(root)

    def _project_dir(self, project_id: str) -> str:
        return os.path.join(self.root, "project", project_id)

    def project_comments(self, project_id: str) -> list[dict]:
        path = os.path.join(self._project_dir(project_id), "comments.json")
        try:
            payload = _read_json(path)
        except FileNotFoundError:
            raise ProjectNotFoundError(f"no such project fixture: {project_id}") from None
        if not isinstance(payload, list):
            raise TransportError(f"{path}: expected a JSON array of comments")
        return payload

    def frame_image(self, project_id: str, frame_id: str) -> Image.Image:
        path = os.path.join(self._project_dir(project_id), "frames", f"{frame_id}.png")
        try:
            with Image.open(path) as img:
                return img.convert("RGBA")
        except FileNotFoundError:
            raise FrameImageMissingError(f"missing frame image: {frame_id}") from None
        except OSError as exc:
            raise TransportError(f"unreadable frame image {path}: {exc}") from exc


class FixtureCodeHostTransport:
    """Code-host API stand-in: PR conversations live in JSON files.

    Posting appends to the file, so idempotency checks and re-fetches see
    exactly what a live server would return.
    """

    def __init__(
        self,
        root: str | os.PathLike[str],
        clock: Optional[Callable[[], datetime]] = None,
    ) -> None:
        self.root = os.fspath(root)
        self._clock = clock or (lambda: datetime.now(timezone.utc))

    def _pr_path(self, repo: str, pr_number: int) -> str:
        return os.path.join(self.root, "repo", repo, "pr", str(pr_number), "comments.json")

    def pr_exists(self, repo: str, pr_number: int) -> bool:
        return os.path.isfile(self._pr_path(repo, pr_number))

    def list_pr_comments(self, repo: str, pr_number: int) -> list[dict]:
        path = self._pr_path(repo, pr_number)
        try:
            payload = _read_json(path)
        except FileNotFoundError:
            raise PRNotFoundError(f"PR not found: {repo}#{pr_number}") from None
        if not isinstance(payload, list):
            raise TransportError(f"{path}: expected a JSON array of comments")
        return payload

    def post_comment(self, repo: str, pr_number: int, body: str) -> str:
        comments = self.list_pr_comments(repo, pr_number)
        existing = {c.get("id") for c in comments}
        n = len(comments) + 1
        while f"posted-{n}" in existing:
            n += 1
        remote_id = f"posted-{n}"
        created = self._clock().astimezone(timezone.utc)
        comments.append(
            {
                "id": remote_id,
                "body": body,
                "author": "bridge-bot",
                "author_role": "teaching-assistant",
                "created_at": created.isoformat().replace("+00:00", "Z"),
            }
        )
        write_json(self._pr_path(repo, pr_number), comments)
        return remote_id


# -- live HTTP transports ------------------------------------------------
#
# Thin adapters over a generic JSON-over-HTTP surface mirroring the fixture
# schemas. Kept out of the offline test surface on purpose; URL building is
# the only part exercised by tests.


def _require_token(var: str) -> str:
    token = os.environ.get(var, "")
    if not token:
        raise TransportError(f"missing credential: set {var}")
    return token


class HttpDesignTransport:
    def __init__(self, base_url: str, token: Optional[str] = None) -> None:
        self.base_url = base_url.rstrip("/")
        self._token = token

    def comments_url(self, project_id: str) -> str:
        return f"{self.base_url}/projects/{quote(project_id, safe='')}/comments"

    def frame_url(self, project_id: str, frame_id: str) -> str:
        return (
            f"{self.base_url}/projects/{quote(project_id, safe='')}"
            f"/frames/{quote(frame_id, safe='')}.png"
        )

    def _headers(self) -> dict[str, str]:
        token = self._token or _require_token(DESIGN_TOKEN_VAR)
        return {"Authorization": f"Bearer {token}"}

    def _get(self, url: str, **kwargs):
        import requests

        try:
            resp = requests.get(url, headers=self._headers(), timeout=30, **kwargs)
        except requests.RequestException as exc:
            raise TransportError(f"design transport failure: {exc}") from exc
        if resp.status_code == 404:
            raise ProjectNotFoundError(url)
        if resp.status_code >= 400:
            raise TransportError(f"{url}: HTTP {resp.status_code}")
        return resp

    def project_comments(self, project_id: str) -> list[dict]:
        return self._get(self.comments_url(project_id)).json()

    def frame_image(self, project_id: str, frame_id: str) -> Image.Image:
        try:
            resp = self._get(self.frame_url(project_id, frame_id))
        except ProjectNotFoundError:
            raise FrameImageMissingError(f"missing frame image: {frame_id}") from None
        return Image.open(io.BytesIO(resp.content)).convert("RGBA")


class HttpCodeHostTransport:
    def __init__(self, base_url: str, token: Optional[str] = None) -> None:
        self.base_url = base_url.rstrip("/")
        self._token = token

    def pr_url(self, repo: str, pr_number: int) -> str:
        return f"{self.base_url}/repos/{repo}/pulls/{pr_number}"

    def comments_url(self, repo: str, pr_number: int) -> str:
        return f"{self.base_url}/repos/{repo}/issues/{pr_number}/comments"

    def git_url(self, repo: str, suffix: str) -> str:
        return f"{self.base_url}/repos/{repo}/git/{suffix}"

    def _headers(self) -> dict[str, str]:
        token = self._token or _require_token(CODEHOST_TOKEN_VAR)
        return {"Authorization": f"Bearer {token}", "Accept": "application/json"}

    def _request(self, method: str, url: str, **kwargs):
        import requests

        try:
            resp = requests.request(method, url, headers=self._headers(), timeout=30, **kwargs)
        except requests.RequestException as exc:
            raise TransportError(f"code-host transport failure: {exc}") from exc
        return resp

    def pr_exists(self, repo: str, pr_number: int) -> bool:
        return self._request("GET", self.pr_url(repo, pr_number)).status_code == 200

    def list_pr_comments(self, repo: str, pr_number: int) -> list[dict]:
        resp = self._request("GET", self.comments_url(repo, pr_number))
        if resp.status_code == 404:
            raise PRNotFoundError(f"PR not found: {repo}#{pr_number}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code} listing PR comments")
        return [
            {
                "id": str(c["id"]),
                "body": c.get("body", ""),
                "author": (c.get("user") or {}).get("login", c.get("author", "")),
                "author_role": c.get("author_role"),
                "created_at": c.get("created_at"),
                "file_path": c.get("path") or c.get("file_path"),
            }
            for c in resp.json()
        ]

    def post_comment(self, repo: str, pr_number: int, body: str) -> str:
        resp = self._request("POST", self.comments_url(repo, pr_number), json={"body": body})
        if resp.status_code == 404:
            raise PRNotFoundError(f"PR not found: {repo}#{pr_number}")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code} posting PR comment")
        return str(resp.json()["id"])

    def object_store(self, repo: str) -> "RemoteObjectStore":
        return RemoteObjectStore(self, repo)


class RemoteObjectStore:
    """Git-data-API adapter with the same surface as the local stores.

    Digests come from the server, and the ref update relies on the server's
    fast-forward check rather than a literal compare-and-swap; the local
    stores remain the reference implementation of the store contract.
    """

    def __init__(self, transport: HttpCodeHostTransport, repo: str) -> None:
        self._t = transport
        self._repo = repo

    def _url(self, suffix: str) -> str:
        return self._t.git_url(self._repo, suffix)

    def _json(self, method: str, suffix: str, **kwargs):
        resp = self._t._request(method, self._url(suffix), **kwargs)
        if resp.status_code == 404:
            return None
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code} on git/{suffix}")
        return resp.json()

    def read_ref(self, name: str) -> Optional[str]:
        short = name.removeprefix("refs/")
        payload = self._json("GET", f"ref/{short}")
        return payload["object"]["sha"] if payload else None

    def cas_ref(self, name: str, expected_old: Optional[str], new: str) -> None:
        from .gitstore import RefConflictError

        short = name.removeprefix("refs/")
        current = self.read_ref(name)
        if current != expected_old:
            raise RefConflictError(f"{name}: expected {expected_old}, found {current}")
        if expected_old is None:
            self._json("POST", "refs", json={"ref": name, "sha": new})
        else:
            self._json("PATCH", f"refs/{short}", json={"sha": new, "force": False})

    def put_blob(self, data: bytes) -> str:
        import base64

        payload = self._json(
            "POST", "blobs", json={"content": base64.b64encode(data).decode("ascii"), "encoding": "base64"}
        )
        return payload["sha"]

    def get_blob(self, digest: str) -> bytes:
        import base64

        payload = self._json("GET", f"blobs/{digest}")
        if payload is None:
            raise TransportError(f"missing blob {digest}")
        return base64.b64decode(payload["content"])

    def put_tree(self, entries) -> str:
        tree = [
            {
                "path": name,
                "mode": mode,
                "type": "tree" if mode == "040000" else "blob",
                "sha": digest,
            }
            for name, (mode, digest) in sorted(entries.items())
        ]
        return self._json("POST", "trees", json={"tree": tree})["sha"]

    def get_tree(self, digest: str) -> dict[str, tuple[str, str]]:
        payload = self._json("GET", f"trees/{digest}")
        if payload is None:
            raise TransportError(f"missing tree {digest}")
        return {e["path"]: (e["mode"], e["sha"]) for e in payload["tree"]}

    def put_commit(self, tree, parents, author, message, timestamp) -> str:
        payload = self._json(
            "POST",
            "commits",
            json={"message": message, "tree": tree, "parents": list(parents)},
        )
        return payload["sha"]

    def get_commit(self, digest: str):
        from .gitstore import Commit

        payload = self._json("GET", f"commits/{digest}")
        if payload is None:
            raise TransportError(f"missing commit {digest}")
        return Commit(
            tree=payload["tree"]["sha"],
            parents=tuple(p["sha"] for p in payload.get("parents", [])),
            author=str(payload.get("author", "")),
            message=payload.get("message", ""),
            timestamp=0,
        )
