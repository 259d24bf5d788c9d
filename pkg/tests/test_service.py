import math
import threading
import urllib.error
import urllib.request

import numpy as np
import pytest
from PIL import Image

from salreid.config import AnnotationConfig
from salreid.service import (
    format_kv,
    load_annotation_data,
    make_server,
    masked_png,
    parse_kv,
)


def build_data_dir(root, n_gallery=40, n_query=2):
    rng = np.random.default_rng(0)
    (root / "images" / "query").mkdir(parents=True)
    (root / "images" / "gallery").mkdir(parents=True)
    (root / "masks").mkdir()
    for i in range(n_query):
        arr = rng.integers(0, 256, size=(32, 16, 3), dtype=np.uint8)
        Image.fromarray(arr).save(root / "images" / "query" / f"q{i}.png")
    for i in range(n_gallery):
        arr = rng.integers(0, 256, size=(32, 16, 3), dtype=np.uint8)
        Image.fromarray(arr).save(root / "images" / "gallery" / f"g{i:03d}.png")
    for i in range(n_query):
        m = np.zeros((32, 16), dtype=np.uint8)
        m[4:12, 3:9] = 255
        Image.fromarray(m, mode="L").save(root / "masks" / f"q{i}__bag.png")
    lines = ["query,target"] + [f"q{i},g{i:03d}" for i in range(n_query)]
    (root / "pairs.csv").write_text("\n".join(lines) + "\n")
    return root


@pytest.fixture
def server(tmp_path):
    build_data_dir(tmp_path)
    srv = make_server(tmp_path, AnnotationConfig(), port=0, seed=3)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    yield base
    srv.shutdown()
    srv.server_close()


def http(method, url, body=None):
    data = body.encode("utf-8") if body is not None else None
    req = urllib.request.Request(url, data=data, method=method)
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, resp.read(), dict(resp.headers)
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read(), dict(exc.headers)


def test_parse_kv_roundtrip():
    text = format_kv([("a", "1"), ("b", "x=y"), ("a", "2")])
    got = parse_kv(text)
    assert got == {"a": ["1", "2"], "b": "x=y"}
    with pytest.raises(ValueError):
        parse_kv("no separator here")


def test_masked_png_mid_gray():
    image = np.full((4, 4, 3), 200, dtype=np.uint8)
    mask = np.zeros((4, 4), dtype=bool)
    mask[1, 1] = True
    png = masked_png(image, mask)
    out = np.array(Image.open(__import__("io").BytesIO(png)))
    assert out[1, 1].tolist() == [200, 200, 200]
    assert out[0, 0].tolist() == [128, 128, 128]
    with pytest.raises(ValueError):
        masked_png(image, np.zeros((2, 2), dtype=bool))


def test_load_annotation_data(tmp_path):
    build_data_dir(tmp_path)
    parts, targets, queries, gallery = load_annotation_data(tmp_path)
    assert {p.key for p in parts} == {("q0", "bag"), ("q1", "bag")}
    assert targets == {"q0": "g000", "q1": "g001"}
    assert len(gallery) == 40


def test_load_annotation_data_validates(tmp_path):
    build = tmp_path / "empty"
    (build / "images" / "query").mkdir(parents=True)
    (build / "images" / "gallery").mkdir(parents=True)
    (build / "masks").mkdir()
    (build / "pairs.csv").write_text("query,target\n")
    with pytest.raises(ValueError, match="no query or gallery"):
        load_annotation_data(build)


def test_full_annotation_flow_over_http(server):
    # create a session
    status, body, _ = http("POST", f"{server}/sessions", "labeler=ann\nimage=q0\npart=bag\n")
    assert status == 200
    view = parse_kv(body.decode())
    sid = view["session"]
    sample = view["sample"]
    assert len(sample) == 32 and len(set(sample)) == 32
    assert view["closed"] == "false"
    assert "g000" in sample  # target present but unmarked

    # two wrong guesses, then the right one
    wrongs = [g for g in sample if g != "g000"]
    for k, wrong in enumerate(wrongs[:2], start=1):
        status, body, _ = http("POST", f"{server}/sessions/{sid}/trials", f"chosen={wrong}\n")
        assert status == 200
        reply = parse_kv(body.decode())
        assert reply == {"correct": "false", "trials": str(k), "closed": "false"}

    status, body, _ = http("POST", f"{server}/sessions/{sid}/trials", "chosen=g000\n")
    reply = parse_kv(body.decode())
    assert reply == {"correct": "true", "trials": "3", "closed": "true"}

    # n = 3 trials, one labeler: score = exp(-9/16)
    status, body, _ = http("GET", f"{server}/parts/q0/bag/score")
    assert status == 200
    score_view = parse_kv(body.decode())
    assert float(score_view["score"]) == pytest.approx(math.exp(-9.0 / 16.0))
    assert score_view["labelers"] == "1"


def test_open_session_view_never_leaks_target(server):
    status, body, _ = http("POST", f"{server}/sessions", "labeler=ann\nimage=q0\npart=bag\n")
    view = parse_kv(body.decode())
    sid = view["session"]
    # audit every key of the open view: target id may appear only inside
    # the unordered sample listing
    for key, value in view.items():
        if key == "sample":
            continue
        values = value if isinstance(value, list) else [value]
        assert "g000" not in values, f"target leaked via {key}"
    assert "correct" not in view

    # still hidden after a wrong trial
    wrong = next(g for g in view["sample"] if g != "g000")
    http("POST", f"{server}/sessions/{sid}/trials", f"chosen={wrong}\n")
    _, body, _ = http("GET", f"{server}/sessions/{sid}")
    again = parse_kv(body.decode())
    assert "correct" not in again
    assert again["wrong"] == wrong

    # the closed view reveals it
    http("POST", f"{server}/sessions/{sid}/trials", "chosen=g000\n")
    _, body, _ = http("GET", f"{server}/sessions/{sid}")
    closed = parse_kv(body.decode())
    assert closed["correct"] == "g000"
    assert closed["closed"] == "true"


def test_masked_query_image_endpoint(server, tmp_path):
    _, body, _ = http("POST", f"{server}/sessions", "labeler=ann\nimage=q0\npart=bag\n")
    sid = parse_kv(body.decode())["session"]
    status, png, headers = http("GET", f"{server}/sessions/{sid}/image")
    assert status == 200
    assert headers["Content-Type"] == "image/png"
    out = np.array(Image.open(__import__("io").BytesIO(png)))
    assert out.shape == (32, 16, 3)
    # outside the mask: mid-gray; inside: original pixels (not all gray)
    assert out[0, 0].tolist() == [128, 128, 128]
    assert not np.all(out[4:12, 3:9] == 128)


def test_gallery_image_endpoint(server):
    status, png, headers = http("GET", f"{server}/images/g007")
    assert status == 200
    assert headers["Content-Type"] == "image/png"
    img = Image.open(__import__("io").BytesIO(png))
    assert img.size == (16, 32)


def test_parts_listing(server):
    status, body, _ = http("GET", f"{server}/parts")
    assert status == 200
    view = parse_kv(body.decode())
    parts = view["part"] if isinstance(view["part"], list) else [view["part"]]
    assert set(parts) == {"q0/bag", "q1/bag"}


def test_export_endpoint(server):
    _, body, _ = http("POST", f"{server}/sessions", "labeler=ann\nimage=q0\npart=bag\n")
    sid = parse_kv(body.decode())["session"]
    http("POST", f"{server}/sessions/{sid}/trials", "chosen=g000\n")
    status, body, headers = http("GET", f"{server}/export")
    assert status == 200
    assert headers["Content-Type"] == "text/csv"
    lines = body.decode().strip().splitlines()
    assert lines[0] == "image,part,score,labelers"
    assert any(line.startswith("q0,bag,") for line in lines[1:])


def test_http_error_codes(server):
    status, _, _ = http("GET", f"{server}/sessions/999")
    assert status == 404
    status, _, _ = http("GET", f"{server}/images/nope")
    assert status == 404
    status, _, _ = http("GET", f"{server}/parts/q0/unknown/score")
    assert status == 404
    status, _, _ = http("POST", f"{server}/sessions", "labeler=a\nimage=q0\npart=zz\n")
    assert status == 404
    status, _, _ = http("GET", f"{server}/no/such/route")
    assert status == 404

    # scoring a part with no closed sessions is a conflict, not a crash
    status, _, _ = http("GET", f"{server}/parts/q1/bag/score")
    assert status == 409

    _, body, _ = http("POST", f"{server}/sessions", "labeler=a\nimage=q0\npart=bag\n")
    sid = parse_kv(body.decode())["session"]
    status, _, _ = http("POST", f"{server}/sessions/{sid}/trials", "chosen=not-there\n")
    assert status == 409
    http("POST", f"{server}/sessions/{sid}/trials", "chosen=g000\n")
    status, _, _ = http("POST", f"{server}/sessions/{sid}/trials", "chosen=g000\n")
    assert status == 409  # closed session


def test_cors_headers_present(server):
    status, body, headers = http("GET", f"{server}/parts")
    assert headers["Access-Control-Allow-Origin"] == "*"
    req = urllib.request.Request(f"{server}/sessions", method="OPTIONS")
    with urllib.request.urlopen(req, timeout=10) as resp:
        assert resp.status == 204
        assert resp.headers["Access-Control-Allow-Methods"] == "GET, POST, OPTIONS"


def test_sessions_persist_across_server_restart(tmp_path):
    build_data_dir(tmp_path)
    srv = make_server(tmp_path, AnnotationConfig(), port=0, seed=3)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{srv.server_address[1]}"
    _, body, _ = http("POST", f"{base}/sessions", "labeler=ann\nimage=q0\npart=bag\n")
    sid = parse_kv(body.decode())["session"]
    http("POST", f"{base}/sessions/{sid}/trials", "chosen=g000\n")
    srv.shutdown()
    srv.server_close()

    srv2 = make_server(tmp_path, AnnotationConfig(), port=0, seed=3)
    thread2 = threading.Thread(target=srv2.serve_forever, daemon=True)
    thread2.start()
    base2 = f"http://127.0.0.1:{srv2.server_address[1]}"
    status, body, _ = http("GET", f"{base2}/sessions/{sid}")
    assert status == 200
    assert parse_kv(body.decode())["closed"] == "true"
    srv2.shutdown()
    srv2.server_close()
