"""Offline archive: JSON manifest plus flat little-endian binary arrays."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .eim import EimSpace
from .greedy import IterationRecord, OfflineState
from .pod import ReducedBasis

FORMAT_VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8"}


class ArchiveError(RuntimeError):
    pass


def _write_array(directory: Path, name: str, arr: np.ndarray) -> dict:
    kind = "i8" if np.issubdtype(arr.dtype, np.integer) else "f8"
    data = np.ascontiguousarray(arr, dtype=_DTYPES[kind])
    fname = f"{name}.bin"
    (directory / fname).write_bytes(data.tobytes())
    return {"file": fname, "dtype": _DTYPES[kind], "shape": list(data.shape)}


def _read_array(directory: Path, meta: dict) -> np.ndarray:
    raw = (directory / meta["file"]).read_bytes()
    arr = np.frombuffer(raw, dtype=meta["dtype"])
    expected = int(np.prod(meta["shape"])) if meta["shape"] else 1
    if arr.size != expected:
        raise ArchiveError(f"{meta['file']}: expected {expected} values, found {arr.size}")
    return arr.reshape(meta["shape"]).astype(arr.dtype.newbyteorder("="))


def save_archive(directory, state: OfflineState, config_hash: str, config: dict,
                 extra: dict | None = None) -> Path:
    """Write ``state`` to ``directory`` (must not already hold an archive)."""
    directory = Path(directory)
    if (directory / "manifest.json").exists():
        raise ArchiveError(f"{directory} already holds an archive; refusing to overwrite")
    directory.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for c, (b, s) in enumerate(zip(state.bases, state.spaces)):
        arrays[f"rb_{c}"] = _write_array(directory, f"rb_{c}", b.vectors)
        arrays[f"singular_values_{c}"] = _write_array(directory, f"singular_values_{c}", b.singular_values)
        arrays[f"eim_functions_{c}"] = _write_array(directory, f"eim_functions_{c}", s.functions)
        arrays[f"eim_magic_{c}"] = _write_array(directory, f"eim_magic_{c}", s.magic.astype(np.int64))
        arrays[f"theta_{c}"] = _write_array(directory, f"theta_{c}", b.project(s.functions))
    manifest = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "config": config,
        "weight": state.bases[0].weight if state.bases else None,
        "n_components": len(state.bases),
        "N": list(state.n_rb),
        "N_EIM": list(state.n_eim),
        "converged": bool(state.converged),
        "history": [asdict(r) for r in state.history],
        "arrays": arrays,
        **(extra or {}),
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def archive_digest(directory) -> str:
    """sha256 over the manifest and every array file, in name order."""
    directory = Path(directory)
    h = hashlib.sha256()
    for p in sorted(directory.iterdir()):
        if p.name == "manifest.json" or p.suffix == ".bin":
            h.update(p.name.encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def load_archive(directory, config_hash: str | None = None, tol: float = 1e-10):
    """Read an archive and re-verify orthonormality, Kronecker and theta consistency."""
    directory = Path(directory)
    mpath = directory / "manifest.json"
    if not mpath.exists():
        raise ArchiveError(f"no manifest.json in {directory}")
    manifest = json.loads(mpath.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ArchiveError(f"unsupported archive format {manifest.get('format_version')}")
    if config_hash is not None and manifest["config_hash"] != config_hash:
        raise ArchiveError("archive was built from a different configuration (config hash mismatch)")
    w = float(manifest["weight"])
    arrays = manifest["arrays"]
    bases, spaces = [], []
    for c in range(manifest["n_components"]):
        b = ReducedBasis(_read_array(directory, arrays[f"rb_{c}"]), w,
                         _read_array(directory, arrays[f"singular_values_{c}"]))
        s = EimSpace(_read_array(directory, arrays[f"eim_functions_{c}"]),
                     _read_array(directory, arrays[f"eim_magic_{c}"]), w)
        theta = _read_array(directory, arrays[f"theta_{c}"])
        if b.orthonormality_error() > tol:
            raise ArchiveError(f"component {c}: basis not orthonormal ({b.orthonormality_error():.2e})")
        if s.relaxed_kronecker_error() > tol:
            raise ArchiveError(f"component {c}: EIM Kronecker property violated")
        if s.size and np.abs(np.abs(s.functions).max(axis=0) - 1.0).max() > tol:
            raise ArchiveError(f"component {c}: EIM functions not sup-normalised")
        if theta.size and np.abs(theta - b.project(s.functions)).max() > tol * max(1.0, np.abs(theta).max()):
            raise ArchiveError(f"component {c}: theta table inconsistent with basis and EIM functions")
        bases.append(b)
        spaces.append(s)
    history = [IterationRecord(**{**r, "mu": tuple(r["mu"]) if r["mu"] is not None else None,
                                  "n_rb": tuple(r["n_rb"]), "n_eim": tuple(r["n_eim"])})
               for r in manifest["history"]]
    state = OfflineState(bases, spaces, history, bool(manifest["converged"]))
    return state, manifest
