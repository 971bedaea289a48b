"""
Output files of a run: CSV series, JSON summaries, JSON-lines records, 0/1 and
probability grids, and a manifest with a sha256 checksum per artifact.
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np
import pandas as pd

from .lattice import DisorderRealization, format_mask_grid
from .wavepacket import ExcitonState

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def to_jsonable(obj: Any) -> Any:
    """numpy scalars/arrays, tuples and dataclasses as plain JSON; non-finite floats become null."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class ArtifactWriter:
    """Writes files under ``out_dir`` and remembers them for the manifest."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[Dict[str, str]] = []

    def _path(self, name: str, kind: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append({"path": name, "kind": kind})
        return path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        path = self._path(name, "csv")
        frame.to_csv(path, index=False, float_format="%.12g")
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name, "json")
        with open(path, "w") as f:
            json.dump(to_jsonable(payload), f, indent=2, sort_keys=True)
            f.write("\n")
        return path

    def write_jsonl(self, name: str, rows: Iterable[Dict[str, Any]]) -> Path:
        path = self._path(name, "jsonl")
        with open(path, "w") as f:
            for row in rows:
                f.write(json.dumps(to_jsonable(row), sort_keys=True) + "\n")
        return path

    def write_text(self, name: str, text: str, kind: str = "text") -> Path:
        path = self._path(name, kind)
        path.write_text(text)
        return path

    def write_mask_grid(self, name: str, realization: DisorderRealization) -> Path:
        return self.write_text(name, format_mask_grid(realization), kind="mask_grid")

    def write_phase_grid(self, name: str, realization: DisorderRealization,
                         phases: np.ndarray) -> Path:
        """Per-site mask phases on the full grid, vacancies as nan."""
        grid = np.full(realization.spec.n_cells, np.nan)
        grid[realization.occupied_indices] = phases
        path = self._path(name, "phase_grid")
        np.savetxt(path, np.atleast_2d(grid.reshape(realization.spec.shape)), fmt="%.10g")
        return path

    def write_state(self, name: str, state: ExcitonState) -> Path:
        """Probability grid, one lattice row per line."""
        path = self._path(name, "state_grid")
        header = f"t={state.time_tag:.12g} s shape={'x'.join(map(str, state.realization.spec.shape))}"
        np.savetxt(path, np.atleast_2d(state.probability_grid()), fmt="%.10e", header=header)
        return path

    def write_manifest(self) -> Path:
        entries = []
        for item in self.artifacts:
            path = self.out_dir / item["path"]
            entries.append({**item, "bytes": path.stat().st_size, "sha256": sha256_of(path)})
        manifest = self.out_dir / MANIFEST_NAME
        with open(manifest, "w") as f:
            json.dump({"artifacts": entries}, f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Results saved to {self.out_dir} ({len(entries)} artifacts)")
        return manifest
