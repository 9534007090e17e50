"""Runtime configuration for the CLI and the HTTP service."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from .bridge import DEFAULT_IMAGE_REF
from .transports import CODEHOST_TOKEN_VAR, DESIGN_TOKEN_VAR


@dataclass
class ServiceConfig:
    corpus_dir: str = "corpus"
    fixture_dir: Optional[str] = None
    live_mode: bool = False
    listen_address: str = "127.0.0.1:8023"
    image_ref_name: str = DEFAULT_IMAGE_REF
    design_base_url: Optional[str] = None
    codehost_base_url: Optional[str] = None

    def validate(self) -> None:
        if self.live_mode:
            if not (self.design_base_url and self.codehost_base_url):
                raise ValueError("live_mode requires design_base_url and codehost_base_url")
            for var in (DESIGN_TOKEN_VAR, CODEHOST_TOKEN_VAR):
                if not os.environ.get(var):
                    raise ValueError(f"live_mode requires the {var} environment variable")
            if self.fixture_dir:
                raise ValueError("configure either fixture_dir or live endpoints, not both")

    @property
    def host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    @property
    def imagestore_dir(self) -> str:
        return os.path.join(self.corpus_dir, "imagestore")

    @property
    def model_path(self) -> str:
        return os.path.join(self.corpus_dir, "model.json")


def load_config(path: Optional[str] = None, **overrides) -> ServiceConfig:
    """Build a config from an optional JSON file plus keyword overrides
    (CLI flags win over the file)."""
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if not isinstance(payload, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        unknown = set(payload) - set(ServiceConfig.__dataclass_fields__)
        if unknown:
            raise ValueError(f"{path}: unknown config keys: {sorted(unknown)}")
        values.update(payload)
    values.update({k: v for k, v in overrides.items() if v is not None})
    config = ServiceConfig(**values)
    config.validate()
    return config
