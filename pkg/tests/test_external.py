import json
import socket
import sys
import threading

import numpy as np
import pytest

from clickseg.errors import SegmenterError
from clickseg.external import ExternalSegmenter
from clickseg.segment import BaselineSegmenter, WindowContext
from clickseg.spacetime import superimpose, voxelize
from clickseg.types import Click, Pose, Scan

SERVER = f"cmd:{sys.executable} -m clickseg.ext_server"


def make_ctx(rng, n=200):
    xyz = rng.uniform(-4, 4, size=(n, 3))
    scan = Scan(xyz=xyz, intensity=np.zeros(n), pose=Pose.identity(), scan_index=0)
    cloud = superimpose([scan])
    return WindowContext(cloud=cloud, grid=voxelize(cloud, 0.25))


def clicks_for(rng, k=3):
    return [
        Click(position=tuple(rng.uniform(-4, 4, size=3)), scan_index=0,
              object_id=i + 1, order_k=i)
        for i in range(k)
    ]


def script_endpoint(tmp_path, body):
    """An endpoint running an inline python script as the remote peer."""
    path = tmp_path / "peer.py"
    path.write_text(body)
    return f"cmd:{sys.executable} {path}"


class TestReferenceServer:
    def test_zeros_mode_all_ties_to_lowest_id(self, rng):
        ctx = make_ctx(rng)
        seg = ExternalSegmenter(f"{SERVER} zeros", timeout=10)
        try:
            pred = seg.predict(ctx, clicks_for(rng))
        finally:
            seg.close()
        assert (pred == 1).all()

    def test_baseline_mode_bitwise_equals_local(self, rng):
        ctx = make_ctx(rng)
        clicks = clicks_for(rng)
        local = BaselineSegmenter().predict(ctx, clicks)
        seg = ExternalSegmenter(f"{SERVER} baseline", timeout=10)
        try:
            remote = seg.predict(ctx, clicks)
        finally:
            seg.close()
        np.testing.assert_array_equal(local, remote)

    def test_labels_mode_equals_nearest_click(self, rng):
        ctx = make_ctx(rng)
        clicks = clicks_for(rng)
        seg = ExternalSegmenter(f"{SERVER} labels", timeout=10)
        try:
            pred = seg.predict(ctx, clicks)
        finally:
            seg.close()
        np.testing.assert_array_equal(pred, BaselineSegmenter().predict(ctx, clicks))

    def test_remote_error_surfaces(self, rng):
        ctx = make_ctx(rng)
        seg = ExternalSegmenter(f"{SERVER} baseline", timeout=10)
        try:
            with pytest.raises(SegmenterError, match="no clicks"):
                seg.predict(ctx, [])
        finally:
            seg.close()


class TestFaultInjection:
    def test_version_mismatch_rejected(self, tmp_path):
        ep = script_endpoint(tmp_path, (
            "import sys, json\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'hello', 'version': 99}), flush=True)\n"
            "sys.stdin.read()\n"
        ))
        with pytest.raises(SegmenterError, match="handshake"):
            ExternalSegmenter(ep, timeout=10)

    def test_peer_dies_mid_response(self, tmp_path, rng):
        ep = script_endpoint(tmp_path, (
            "import sys, json\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'hello', 'version': 1}), flush=True)\n"
            "sys.stdin.readline()\n"
            "sys.stdout.write('{\"type\": \"segment_resp')\n"  # truncated, no newline
            "sys.stdout.flush()\n"
        ))
        seg = ExternalSegmenter(ep, timeout=10)
        try:
            with pytest.raises(SegmenterError, match="closed mid-response"):
                seg.predict(make_ctx(rng, 20), clicks_for(rng, 1))
        finally:
            seg.close()

    def test_malformed_json_rejected(self, tmp_path, rng):
        ep = script_endpoint(tmp_path, (
            "import sys, json\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'hello', 'version': 1}), flush=True)\n"
            "sys.stdin.readline()\n"
            "print('not json at all', flush=True)\n"
            "sys.stdin.read()\n"
        ))
        seg = ExternalSegmenter(ep, timeout=10)
        try:
            with pytest.raises(SegmenterError, match="malformed"):
                seg.predict(make_ctx(rng, 20), clicks_for(rng, 1))
        finally:
            seg.close()

    def test_nan_responses_rejected(self, tmp_path, rng):
        ep = script_endpoint(tmp_path, (
            "import sys, json\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'hello', 'version': 1}), flush=True)\n"
            "req = json.loads(sys.stdin.readline())\n"
            "n = len(req['voxels'])\n"
            "objs = [c['object'] for c in req['clicks']]\n"
            "m = [[float('nan')] * n for _ in objs]\n"
            "print(json.dumps({'type': 'segment_response', 'kind': 'responses',\n"
            "                  'data': {'objects': objs, 'matrix': m}}), flush=True)\n"
            "sys.stdin.read()\n"
        ))
        seg = ExternalSegmenter(ep, timeout=10)
        try:
            with pytest.raises(SegmenterError, match="NaN"):
                seg.predict(make_ctx(rng, 20), clicks_for(rng, 1))
        finally:
            seg.close()

    def test_wrong_label_length_rejected(self, tmp_path, rng):
        ep = script_endpoint(tmp_path, (
            "import sys, json\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'hello', 'version': 1}), flush=True)\n"
            "sys.stdin.readline()\n"
            "print(json.dumps({'type': 'segment_response', 'kind': 'labels',\n"
            "                  'data': [1, 2]}), flush=True)\n"
            "sys.stdin.read()\n"
        ))
        seg = ExternalSegmenter(ep, timeout=10)
        try:
            with pytest.raises(SegmenterError, match="length mismatch"):
                seg.predict(make_ctx(rng, 200), clicks_for(rng, 1))
        finally:
            seg.close()

    def test_timeout_on_silent_peer(self, tmp_path):
        ep = script_endpoint(tmp_path, (
            "import time, sys\n"
            "sys.stdin.readline()\n"
            "time.sleep(60)\n"
        ))
        with pytest.raises(SegmenterError, match="timeout"):
            ExternalSegmenter(ep, timeout=0.5)

    def test_bad_endpoint_scheme(self):
        with pytest.raises(SegmenterError, match="endpoint"):
            ExternalSegmenter("udp:localhost:1")


def _tcp_peer(server_sock, replies):
    conn, _ = server_sock.accept()
    buf = b""
    with conn:
        for reply in replies:
            while b"\n" not in buf:
                chunk = conn.recv(4096)
                if not chunk:
                    return
                buf += chunk
            _, buf = buf.split(b"\n", 1)
            conn.sendall((json.dumps(reply) + "\n").encode())


class TestTcpTransport:
    def test_handshake_and_labels_over_tcp(self, rng):
        ctx = make_ctx(rng, 30)
        n = ctx.grid.n_voxels
        srv = socket.create_server(("127.0.0.1", 0))
        port = srv.getsockname()[1]
        replies = [
            {"type": "hello", "version": 1},
            {"type": "segment_response", "kind": "labels", "data": [5] * n},
        ]
        t = threading.Thread(target=_tcp_peer, args=(srv, replies), daemon=True)
        t.start()
        seg = ExternalSegmenter(f"tcp:127.0.0.1:{port}", timeout=10)
        try:
            pred = seg.predict(ctx, clicks_for(rng, 1))
        finally:
            seg.close()
            srv.close()
        assert (pred == 5).all()
