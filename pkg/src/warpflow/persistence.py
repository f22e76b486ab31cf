"""Stable serialization of profiles, checkpoints, and run records.

Arrays are stored as base64 of raw little-endian float64 so round trips are
bit-exact (resume determinism and cross-checkpoint audits compare at the bit
level). JSON carries the structure; schema_version gates decoding.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import DataError
from .grid import Grid, MeshSpec, make_graded_grid, make_uniform_grid
from .metric import Profile, validate_smoothness

SCHEMA_VERSION = "1.0"

__all__ = [
    "SCHEMA_VERSION",
    "encode_profile",
    "decode_profile",
    "encode_checkpoint",
    "decode_checkpoint",
    "grid_from_mesh",
]


def _enc_array(a: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode(
        "ascii"
    )


def _dec_array(s: str, n: int) -> np.ndarray:
    raw = base64.b64decode(s.encode("ascii"), validate=True)
    if len(raw) != 8 * n:
        raise DataError(f"array payload holds {len(raw) // 8} values, expected {n}")
    return np.frombuffer(raw, dtype="<f8").astype(float, copy=True)


def _check_version(found: str):
    major = str(found).split(".")[0]
    if major != SCHEMA_VERSION.split(".")[0]:
        raise DataError(
            f"schema version {found} not readable by this build ({SCHEMA_VERSION})"
        )


def grid_from_mesh(node_count: int, mesh: MeshSpec) -> Grid:
    if mesh.kind == "uniform":
        return make_uniform_grid(node_count)
    return make_graded_grid(node_count, mesh.beta_waist, mesh.beta_tip)


def encode_profile(p: Profile, provenance: dict | None = None) -> bytes:
    """Losslessly serialize a profile (with its mesh and provenance)."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "profile",
        "n": p.n,
        "node_count": p.grid.node_count,
        "mesh": p.grid.mesh.as_dict(),
        "arrays": {
            "chi": _enc_array(p.chi),
            "psi": _enc_array(p.psi),
            "phi": _enc_array(p.phi),
        },
        "provenance": provenance or {"generator": "unspecified"},
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def decode_profile(blob: bytes, validate: bool = True, rtol: float = 1e-5) -> Profile:
    """Decode and (by default) re-validate the smoothness conditions."""
    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed profile payload: {exc}") from exc
    if doc.get("kind") != "profile":
        raise DataError("payload is not a profile record")
    _check_version(doc.get("schema_version", "0"))
    n_nodes = int(doc["node_count"])
    mesh = MeshSpec.from_dict(doc["mesh"])
    grid = grid_from_mesh(n_nodes, mesh)
    arrays = doc["arrays"]
    p = Profile(
        grid,
        _dec_array(arrays["chi"], n_nodes),
        _dec_array(arrays["psi"], n_nodes),
        _dec_array(arrays["phi"], n_nodes),
        int(doc["n"]),
    )
    if validate:
        rep = validate_smoothness(p, rtol)
        if not rep.passed:
            names = ", ".join(c["name"] for c in rep.failing())
            raise DataError(f"decoded profile fails smoothness validation: {names}")
    return p


def encode_checkpoint(state, opts_dict: dict, monitor_state: dict) -> bytes:
    """Serialize a mid-run state with everything resume needs.

    monitor_state carries the summary rows recorded so far (so the resumed
    run reproduces the full summary table byte-for-byte) plus the run's
    reference gauges (initial area, initial curvature scale, temporal floor
    accumulators).
    """
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "checkpoint",
        "time": state.time,
        "step_index": state.step_index,
        "dt_last": state.dt_last,
        "profile": json.loads(encode_profile(state.profile).decode("utf-8")),
        "options": opts_dict,
        "monitor_state": monitor_state,
    }
    return json.dumps(doc, sort_keys=True).encode("utf-8")


def decode_checkpoint(blob: bytes):
    from .evolve import FlowState

    try:
        doc = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed checkpoint payload: {exc}") from exc
    if doc.get("kind") != "checkpoint":
        raise DataError("payload is not a checkpoint record")
    _check_version(doc.get("schema_version", "0"))
    prof_doc = json.dumps(doc["profile"], sort_keys=True).encode("utf-8")
    profile = decode_profile(prof_doc, validate=False)
    state = FlowState(
        time=float(doc["time"]),
        profile=profile,
        step_index=int(doc["step_index"]),
        dt_last=float(doc["dt_last"]),
    )
    return state, doc["options"], doc["monitor_state"]
