"""Crash-safe versioned model storage, one directory per point.

Writes land in a temporary file and become visible through an atomic rename,
so a reader never observes a torn record. Writers for the same point
serialize through an advisory file lock; different points proceed in
parallel. The version scan of the directory is the source of truth; the
small `latest` pointer file is a convenience for external tooling.
"""

from __future__ import annotations

import fcntl
import os
import re
import time
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

from .errors import NotFoundError, StoreError, ValidationError
from .record import ModelRecord, record_from_bytes
from .series import PointId

_VERSION_FILE = re.compile(r"^v(\d{6})\.lcm$")


@dataclass(frozen=True)
class VersionInfo:
    version: int
    created_at: int
    headline_mse: float | None


class ModelRegistry:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _point_dir(self, point: PointId) -> Path:
        return self.root / point.sanitized()

    def _version_path(self, point: PointId, version: int) -> Path:
        return self._point_dir(point) / f"v{version:06d}.lcm"

    @contextmanager
    def _point_lock(self, point: PointId):
        pdir = self._point_dir(point)
        pdir.mkdir(parents=True, exist_ok=True)
        fd = os.open(pdir / ".lock", os.O_CREAT | os.O_RDWR, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            yield
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def _scan_versions(self, point: PointId) -> list[int]:
        pdir = self._point_dir(point)
        if not pdir.is_dir():
            return []
        versions = []
        for name in os.listdir(pdir):
            m = _VERSION_FILE.match(name)
            if m:
                versions.append(int(m.group(1)))
        return sorted(versions)

    def _atomic_write(self, path: Path, data: bytes) -> None:
        tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
        try:
            with open(tmp, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as e:
            tmp.unlink(missing_ok=True)
            raise StoreError(f"failed writing {path}: {e}") from e

    def put(self, record: ModelRecord, now: int | None = None) -> int:
        """Store under the next version for the record's point; atomic.

        Returns the assigned version. Prior versions are never mutated."""
        if now is None:
            now = int(time.time())
        with self._point_lock(record.point):
            existing = self._scan_versions(record.point)
            version = (existing[-1] if existing else 0) + 1
            stamped = record.stamped(version=version, created_at=now)
            self._atomic_write(self._version_path(record.point, version), stamped.to_bytes())
            self._atomic_write(
                self._point_dir(record.point) / "latest", f"{version}\n".encode()
            )
        return version

    def _load(self, path: Path) -> ModelRecord:
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise NotFoundError(f"no record at {path}") from None
        except OSError as e:
            raise StoreError(f"failed reading {path}: {e}") from e
        return record_from_bytes(data, source=str(path))

    def get_version(self, point: PointId, version: int) -> ModelRecord:
        if version < 1:
            raise ValidationError(f"version must be >= 1, got {version}")
        path = self._version_path(point, version)
        if not path.exists():
            raise NotFoundError(f"point {point}: version {version} not found")
        return self._load(path)

    def get_latest(self, point: PointId) -> ModelRecord:
        versions = self._scan_versions(point)
        if not versions:
            raise NotFoundError(f"point {point}: no model versions")
        return self.get_version(point, versions[-1])

    def latest_version(self, point: PointId) -> int | None:
        versions = self._scan_versions(point)
        return versions[-1] if versions else None

    def list_versions(self, point: PointId) -> list[VersionInfo]:
        """Ascending (version, created_at, headline MSE) for one point."""
        infos = []
        for v in self._scan_versions(point):
            rec = self.get_version(point, v)
            infos.append(
                VersionInfo(version=v, created_at=rec.created_at, headline_mse=rec.headline_mse())
            )
        return infos

    def points(self) -> list[str]:
        if not self.root.is_dir():
            return []
        out = []
        for name in sorted(os.listdir(self.root)):
            if (self.root / name).is_dir() and self._has_versions(self.root / name):
                out.append(name)
        return out

    @staticmethod
    def _has_versions(pdir: Path) -> bool:
        return any(_VERSION_FILE.match(n) for n in os.listdir(pdir))

    def prune(self, point: PointId, keep: int) -> list[int]:
        """Delete all but the newest `keep` versions; returns removed versions."""
        if keep < 1:
            raise ValidationError("must keep at least one version")
        removed = []
        with self._point_lock(point):
            versions = self._scan_versions(point)
            for v in versions[:-keep]:
                self._version_path(point, v).unlink(missing_ok=True)
                removed.append(v)
        return removed
