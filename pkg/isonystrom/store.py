from __future__ import annotations

from abc import ABC, abstractmethod
from hashlib import sha256
import logging
from pathlib import Path
import pickle
from typing import Any

from .base import YamlObject

logger = logging.getLogger(__name__)

SUFFIX = ".step"


class BaseStore(ABC, YamlObject):
    "Cache of sweep step results keyed by the plain values that determine them"

    @abstractmethod
    def fetch(self, key: Any) -> Path | None:
        "Location of the entry for a key, if one has been saved"

    @abstractmethod
    def get_name(self, key: Any) -> Path:
        "Location the entry for a key is saved under"

    def load(self, key: Any) -> Any | None:
        "The stored result for a key, or None"
        path = self.fetch(key)
        if path is None:
            return None
        try:
            return pickle.loads(path.read_bytes())
        except (OSError, pickle.UnpicklingError, EOFError) as e:
            logger.warning("Ignoring unreadable cached result %s: %s", path, e)
            return None

    def save(self, key: Any, value: Any):
        # write then rename, so an interrupted sweep never leaves half an entry
        path = self.get_name(key)
        partial = path.with_name(path.name + ".partial")
        partial.write_bytes(pickle.dumps(value))
        partial.replace(path)
        logger.debug("Cached step result as %s", path)


class Store(BaseStore, yamltag="!store.default", path_resolver=["store"]):
    "One file per finished sweep step, named by the sha256 of its key"

    directory: Path

    def __init__(self, directory: str | Path = ".isonystrom-cache"):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def __repr__(self) -> str:
        return f"Store({str(self.directory)!r})"

    def get_key(self, obj: Any) -> Path:
        digest = sha256(pickle.dumps(obj)).hexdigest()
        return Path(digest[:2], digest[2:] + SUFFIX)

    def fetch(self, key: Any) -> Path | None:
        path = self.directory / self.get_key(key)
        return path if path.is_file() else None

    def get_name(self, key: Any) -> Path:
        dest = self.directory / self.get_key(key)
        dest.parent.mkdir(exist_ok=True)
        return dest
