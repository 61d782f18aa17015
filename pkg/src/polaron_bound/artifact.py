"""Persistence of solved fields as checksummed JSON."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .pekar_scf import PekarSolution, ScfSettings, rebuild_solution
from .radial_core import build_grid

FORMAT_VERSION = 1


class ProvenanceError(RuntimeError):
    """Checksum mismatch or an unreadable artifact."""


class ArtifactVersionError(RuntimeError):
    """The artifact was written by a newer format."""


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def checksum(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def summary_of(sol: PekarSolution) -> dict:
    return {"e_pek": sol.e_pek, "lambda_pek": sol.lambda_pek, "m_lp": sol.m_lp,
            "lambda": sol.lambda_gauss, "iterations": sol.iterations}


def solution_payload(sol: PekarSolution) -> dict:
    s = sol.settings
    return {
        "format_version": FORMAT_VERSION,
        "kind": "pekar_solution",
        "grid": {"n": sol.grid.n, "r_max": sol.grid.r_max, "scheme": sol.grid.scheme},
        "settings": {"mixing": s.mixing, "tol": s.tol, "max_iter": s.max_iter, "init_width": s.init_width},
        "iterations": sol.iterations,
        "residual": sol.residual,
        "summary": summary_of(sol),
        "psi": [float(x) for x in sol.psi.values],
        "phi": [float(x) for x in sol.phi.values],
    }


def write_solution(sol: PekarSolution, path: str | Path) -> str:
    """Write the artifact and return its checksum."""
    payload = solution_payload(sol)
    digest = checksum(payload)
    Path(path).write_text(canonical_json({"checksum": digest, "payload": payload}) + "\n")
    return digest


def read_payload(path: str | Path) -> tuple[dict, str]:
    """Load and verify an artifact, returning the payload and its checksum."""
    try:
        doc = json.loads(Path(path).read_text())
        payload, digest = doc["payload"], doc["checksum"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ProvenanceError(f"cannot read artifact {path}: {exc}") from exc
    if checksum(payload) != digest:
        raise ProvenanceError(f"checksum mismatch in {path}")
    version = payload.get("format_version")
    if not isinstance(version, int) or version > FORMAT_VERSION:
        raise ArtifactVersionError(f"artifact format {version!r} is newer than supported {FORMAT_VERSION}")
    return payload, digest


def load_solution(path: str | Path) -> tuple[PekarSolution, str]:
    """Rebuild the solved field from a verified artifact."""
    payload, digest = read_payload(path)
    g = payload["grid"]
    grid = build_grid(int(g["n"]), float(g["r_max"]), g["scheme"])
    st = payload["settings"]
    settings = ScfSettings(mixing=st["mixing"], tol=st["tol"], max_iter=st["max_iter"], init_width=st["init_width"])
    sol = rebuild_solution(grid, np.asarray(payload["psi"], dtype=float), settings,
                           int(payload["iterations"]), float(payload["residual"]))
    return sol, digest


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
