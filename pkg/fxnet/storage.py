import json
import shutil
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd

from fxnet.errors import ConfigurationError, MissingRunError
from fxnet.models import Measure
from fxnet.services.evolution import NetworkEntry, NetworkSeries
from fxnet.services.network import SpanningTree, degrees

MANIFEST = "manifest.json"
TREES_DIR = "trees"
FLOAT_FORMAT = "%.6g"


class RunStorage:
    """Files of one evolve run: CSV tables, per-network trees and the manifest."""

    def __init__(self, run_dir: str | Path):
        self.run_dir = Path(run_dir)

    def path(self, filename: str) -> Path:
        return self.run_dir / filename

    def exists(self) -> bool:
        return self.path(MANIFEST).is_file()

    def save_frame(self, filename: str, frame: pd.DataFrame) -> Path:
        path = self.path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
        return path

    def save_json(self, filename: str, payload: dict[str, Any]) -> Path:
        path = self.path(filename)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(json.dumps(payload, indent=2, ensure_ascii=False))
            handle.write("\n")
        return path

    def read_json(self, filename: str) -> dict[str, Any]:
        return json.loads(self.path(filename).read_text(encoding="utf-8"))

    def save_tree(self, entry: NetworkEntry) -> Path:
        document = {"date": entry.end_date, "degenerate_pairs": entry.degenerate_pairs, **entry.tree.to_dict()}
        return self.save_json(f"{TREES_DIR}/{entry.end_date}.json", document)

    def manifest(self) -> dict[str, Any]:
        if not self.exists():
            raise MissingRunError(f"no {MANIFEST} in {self.run_dir}; run `fxnet evolve` first")
        return self.read_json(MANIFEST)

    def load_series(self) -> NetworkSeries:
        """Rebuild the network series from stored trees, without recomputing dependence."""
        manifest = self.manifest()
        entries = []
        for path in sorted((self.run_dir / TREES_DIR).glob("*.json")):
            document = json.loads(path.read_text(encoding="utf-8"))
            tree = SpanningTree.from_dict(document)
            entries.append(
                NetworkEntry(
                    end_date=document["date"],
                    tree=tree,
                    degrees=degrees(tree),
                    degenerate_pairs=int(document.get("degenerate_pairs", 0)),
                )
            )
        config = manifest["config"]
        return NetworkSeries(entries=tuple(entries), window_length=int(config["window"]), measure=Measure(config["measure"]))


class StagedRun:
    """Context manager that builds a run in a sibling staging directory.

    The staging directory replaces ``target`` only when the block succeeds; on failure it
    is removed, so no partial output is left behind.
    """

    def __init__(self, target: str | Path):
        self.target = Path(target)
        self.staging = self.target.parent / f".{self.target.name}.staging-{uuid.uuid4().hex[:8]}"

    def __enter__(self) -> RunStorage:
        if self.target.exists() and any(self.target.iterdir()) and not RunStorage(self.target).exists():
            raise ConfigurationError(f"output directory {self.target} exists and is not an fxnet run")
        self.staging.mkdir(parents=True)
        return RunStorage(self.staging)

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            shutil.rmtree(self.staging, ignore_errors=True)
            return False
        if self.target.exists():
            shutil.rmtree(self.target)
        self.staging.rename(self.target)
        return False


class JobStorage:
    def __init__(self, output_dir: str | Path):
        self.base_dir = Path(output_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def create_job(self, initial_meta: dict[str, Any] | None = None) -> str:
        job_id = uuid.uuid4().hex
        self.job_dir(job_id).mkdir(parents=True, exist_ok=True)

        meta = {
            "job_id": job_id,
            "status": "queued",
            "created_at": now(),
            "updated_at": now(),
        }
        if initial_meta:
            meta.update(initial_meta)

        self._save_meta(job_id, meta)
        return job_id

    def job_dir(self, job_id: str) -> Path:
        return self.base_dir / job_id

    def run_dir(self, job_id: str) -> Path:
        return self.job_dir(job_id) / "output"

    def job_exists(self, job_id: str) -> bool:
        return (self.job_dir(job_id) / "job.json").is_file()

    def save_bytes(self, job_id: str, filename: str, data: bytes) -> Path:
        path = self.job_dir(job_id) / filename
        path.write_bytes(data)
        return path

    def update_job(self, job_id: str, **updates: Any) -> dict[str, Any]:
        meta = self.get_job(job_id)
        meta.update(updates)
        meta["updated_at"] = now()
        self._save_meta(job_id, meta)
        return meta

    def get_job(self, job_id: str) -> dict[str, Any]:
        if not self.job_exists(job_id):
            raise MissingRunError(f"unknown job: {job_id}")
        return json.loads((self.job_dir(job_id) / "job.json").read_text(encoding="utf-8"))

    def _save_meta(self, job_id: str, meta: dict[str, Any]) -> None:
        path = self.job_dir(job_id) / "job.json"
        path.write_text(json.dumps(meta, indent=2, ensure_ascii=False), encoding="utf-8")


def now() -> str:
    return datetime.now(timezone.utc).isoformat()
