"""Reference external segmenter speaking the NDJSON protocol on stdio.

Modes: "zeros" answers an all-zero response matrix, "baseline" mirrors
the built-in distance baseline, "labels" answers per-voxel ids from the
nearest click. Mostly a protocol test double and integration example.

Run: python -m clickseg.ext_server [zeros|baseline|labels]
"""

from __future__ import annotations

import json
import sys

import numpy as np

PROTOCOL_VERSION = 1


def _respond(msg, mode):
    voxels = msg["voxels"]
    clicks = msg["clicks"]
    centers = np.array([v["center"] for v in voxels], dtype=np.float64)
    objects = [c["object"] for c in clicks]
    if mode == "zeros":
        matrix = np.zeros((len(clicks), len(centers)))
        return {"kind": "responses", "data": {"objects": objects, "matrix": matrix.tolist()}}
    positions = np.array([c["pos"] for c in clicks], dtype=np.float64)
    diff = positions[:, None, :] - centers[None, :, :]
    matrix = -np.sqrt(diff[:, :, 0] ** 2 + diff[:, :, 1] ** 2 + diff[:, :, 2] ** 2)
    if mode == "baseline":
        return {"kind": "responses", "data": {"objects": objects, "matrix": matrix.tolist()}}
    if mode == "labels":
        nearest = np.argmax(matrix, axis=0)
        labels = [int(objects[i]) for i in nearest]
        return {"kind": "labels", "data": labels}
    raise ValueError(f"unknown mode {mode}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    mode = argv[0] if argv else "baseline"
    out = sys.stdout
    for line in sys.stdin:
        if not line.strip():
            continue
        msg = json.loads(line)
        if msg.get("type") == "hello":
            reply = {"type": "hello", "version": PROTOCOL_VERSION}
        elif msg.get("type") == "segment_request":
            if not msg.get("clicks"):
                reply = {"type": "error", "message": "no clicks"}
            else:
                body = _respond(msg, mode)
                reply = {"type": "segment_response", **body}
        else:
            reply = {"type": "error", "message": f"unknown type {msg.get('type')!r}"}
        out.write(json.dumps(reply, separators=(",", ":")) + "\n")
        out.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
