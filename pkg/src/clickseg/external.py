"""External segmenter adapter: newline-delimited JSON over a child
process's standard streams or a local TCP socket.

Messages: hello{version}, segment_request{window, voxels, clicks},
segment_response{kind: "responses"|"labels", data}, error{message}.
"""

from __future__ import annotations

import json
import selectors
import shlex
import socket
import subprocess
import time

import numpy as np

from .errors import SegmenterError
from .segment import Heatmap, ResponseMap, Segmenter, WindowContext, fuse_clicks, predict_mask
from .types import Click

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class _LineChannel:
    """One NDJSON message per line, with read timeouts."""

    def __init__(self, read_fd, write):
        self._read_fd = read_fd
        self._write = write
        self._buf = b""
        self._sel = selectors.DefaultSelector()
        self._sel.register(read_fd, selectors.EVENT_READ)

    def send(self, msg: dict) -> None:
        data = (json.dumps(msg, separators=(",", ":")) + "\n").encode()
        self._write(data)

    def recv(self, timeout: float) -> dict:
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise SegmenterError(f"timeout after {timeout:.1f}s waiting for response")
            if not self._sel.select(remaining):
                continue
            chunk = self._read_fd.read1(65536) if hasattr(self._read_fd, "read1") else self._read_fd.recv(65536)
            if not chunk:
                raise SegmenterError(
                    f"peer closed mid-response ({len(self._buf)} bytes buffered: "
                    f"{self._buf[:80]!r})"
                )
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise SegmenterError(f"malformed message: {line[:120]!r}") from exc


class ExternalSegmenter(Segmenter):
    """Drives a remote segmenter. Endpoint forms: "cmd:<shell words>"
    (child process over stdio) or "tcp:<host>:<port>"."""

    name = "external"

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self.timeout = timeout
        self._proc = None
        self._sock = None
        if endpoint.startswith("cmd:"):
            argv = shlex.split(endpoint[4:])
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
            self._chan = _LineChannel(self._proc.stdout, self._stdin_write)
        elif endpoint.startswith("tcp:"):
            host, port = endpoint[4:].rsplit(":", 1)
            self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            self._sock.setblocking(False)
            self._chan = _LineChannel(self._sock, self._sock.sendall)
        else:
            raise SegmenterError(f"unknown endpoint {endpoint!r} (want cmd: or tcp:)")
        self._handshake()

    def _stdin_write(self, data: bytes) -> None:
        self._proc.stdin.write(data)
        self._proc.stdin.flush()

    def _handshake(self) -> None:
        self._chan.send({"type": "hello", "version": PROTOCOL_VERSION})
        reply = self._chan.recv(self.timeout)
        if reply.get("type") != "hello" or reply.get("version") != PROTOCOL_VERSION:
            raise SegmenterError(f"handshake failed: {reply!r}")

    def predict(self, ctx: WindowContext, clicks: list[Click]) -> np.ndarray:
        grid = ctx.grid
        request = {
            "type": "segment_request",
            "window": {
                "start": ctx.cloud.window_start,
                "length": ctx.cloud.window_length,
            },
            "voxels": [
                {
                    "key": [int(v) for v in grid.keys[i]],
                    "center": [float(v) for v in grid.centers[i]],
                    "scans": [int(s) for s in grid.scan_sets[i]],
                }
                for i in range(grid.n_voxels)
            ],
            "clicks": [c.to_dict() for c in clicks],
        }
        self._chan.send(request)
        reply = self._chan.recv(self.timeout)
        if reply.get("type") == "error":
            raise SegmenterError(f"remote error: {reply.get('message')}")
        if reply.get("type") != "segment_response":
            raise SegmenterError(f"unexpected message {reply.get('type')!r}")
        kind = reply.get("kind")
        data = reply.get("data")
        if kind == "labels":
            labels = np.asarray(data, dtype=np.int64)
            if labels.shape != (grid.n_voxels,):
                raise SegmenterError("label vector length mismatch")
            return grid.broadcast(labels)
        if kind == "responses":
            matrix = np.asarray(data["matrix"], dtype=np.float64)
            objects = np.asarray(data["objects"], dtype=np.int64)
            if matrix.shape != (len(objects), grid.n_voxels):
                raise SegmenterError("response matrix shape mismatch")
            if np.isnan(matrix).any():
                raise SegmenterError("NaN in response matrix")
            voxel_ids = predict_mask(fuse_clicks(ResponseMap(matrix, objects)))
            return grid.broadcast(voxel_ids)
        raise SegmenterError(f"unknown response kind {kind!r}")

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.terminate()
            self._proc.wait(timeout=5)
        if self._sock is not None:
            self._sock.close()
