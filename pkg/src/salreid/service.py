"""HTTP front of the annotation store.

Request and response bodies use a line-oriented key=value text format;
repeated keys form lists. Images are served as PNG, the masked query
with every non-part pixel set to mid-gray. Routes:

    POST /sessions                      labeler=, image=, part=
    GET  /sessions/{id}                 session view (no target leak)
    GET  /sessions/{id}/image           masked query PNG
    POST /sessions/{id}/trials          chosen=
    GET  /images/{id}                   gallery image PNG
    GET  /parts                         available parts
    GET  /parts/{image}/{part}/score    Eq-based saliency score
    GET  /export                        CSV of all scored parts
"""

from __future__ import annotations

import csv
import io
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
from PIL import Image

from .annotate import AnnotationSession, AnnotationStore, PartMask
from .config import AnnotationConfig

MID_GRAY = 128


def parse_kv(text: str) -> dict:
    """key=value lines to dict; repeated keys collect into lists."""
    out: dict = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed line: {line!r}")
        key, value = line.split("=", 1)
        if key in out:
            prior = out[key]
            if isinstance(prior, list):
                prior.append(value)
            else:
                out[key] = [prior, value]
        else:
            out[key] = value
    return out


def format_kv(pairs) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs)


def session_view(session: AnnotationSession) -> str:
    """Public state of a session; target appears only after close."""
    pairs = [
        ("session", session.session_id),
        ("labeler", session.labeler),
        ("image", session.image_id),
        ("part", session.part_id),
        ("closed", "true" if session.closed else "false"),
        ("trials", session.trial_count),
    ]
    pairs += [("sample", s) for s in session.sample]
    pairs += [("wrong", w) for w in session.wrong]
    if session.closed:
        pairs.append(("correct", session.target))
    return format_kv(pairs)


def masked_png(image: np.ndarray, mask: np.ndarray) -> bytes:
    if image.shape[:2] != mask.shape:
        raise ValueError("mask dims do not match image")
    out = np.full_like(image, MID_GRAY)
    out[mask] = image[mask]
    buf = io.BytesIO()
    Image.fromarray(out).save(buf, format="PNG")
    return buf.getvalue()


def load_annotation_data(data_dir):
    """Read the on-disk layout: query/, gallery/, masks/, pairs.csv.

    Masks are PNGs named {query image id}__{part id}.png with nonzero
    pixels marking the part. pairs.csv maps each query image id to its
    cross-view gallery image id.
    """
    data_dir = Path(data_dir)
    query_dir = data_dir / "images" / "query"
    gallery_dir = data_dir / "images" / "gallery"
    mask_dir = data_dir / "masks"
    pairs_path = data_dir / "pairs.csv"

    queries = {p.stem: p for p in sorted(query_dir.glob("*.png"))}
    gallery = {p.stem: p for p in sorted(gallery_dir.glob("*.png"))}
    if not queries or not gallery:
        raise ValueError(f"no query or gallery images under {data_dir}")

    parts = []
    for mask_path in sorted(mask_dir.glob("*.png")):
        if "__" not in mask_path.stem:
            raise ValueError(f"mask name needs image__part form: {mask_path.name}")
        image_id, part_id = mask_path.stem.split("__", 1)
        if image_id not in queries:
            raise ValueError(f"mask {mask_path.name} has no query image")
        mask = np.array(Image.open(mask_path).convert("L")) > 0
        parts.append(PartMask(image_id=image_id, part_id=part_id, mask=mask))

    targets = {}
    with open(pairs_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["query", "target"]:
            raise ValueError("pairs.csv must start with query,target")
        for row in reader:
            if row[1] not in gallery:
                raise ValueError(f"target {row[1]!r} not in gallery")
            targets[row[0]] = row[1]
    return parts, targets, queries, gallery


class AnnotationService:
    """Bundles the store with image paths for the HTTP handler."""

    def __init__(
        self,
        data_dir,
        cfg: AnnotationConfig,
        seed: int = 0,
        log_name: str = "events.jsonl",
    ):
        parts, targets, queries, gallery = load_annotation_data(data_dir)
        self.queries = queries
        self.gallery = gallery
        self.store = AnnotationStore(
            parts=parts,
            targets=targets,
            gallery_pool=sorted(gallery),
            cfg=cfg,
            seed=seed,
            log_path=Path(data_dir) / log_name,
        )

    def masked_query_png(self, session_id: int) -> bytes:
        session = self.store.session(session_id)
        part = self.store.part(session.image_id, session.part_id)
        image = np.array(Image.open(self.queries[session.image_id]).convert("RGB"))
        return masked_png(image, part.mask)

    def gallery_png(self, image_id: str) -> bytes:
        if image_id not in self.gallery:
            raise KeyError(f"unknown gallery image {image_id}")
        return self.gallery[image_id].read_bytes()

    def export_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["image", "part", "score", "labelers"])
        for part in self.store.parts():
            counts = self.store.closed_counts(part.image_id, part.part_id)
            if len(counts) < self.store.cfg.min_labelers:
                continue
            from .annotate import part_saliency_score

            score = part_saliency_score(counts, self.store.cfg)
            writer.writerow([part.image_id, part.part_id, repr(score), len(counts)])
        return buf.getvalue()


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService  # set on the server class

    def log_message(self, *args):  # quiet test runs
        pass

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def _text(self, status: int, text: str) -> None:
        self._send(status, text.encode("utf-8"), "text/plain; charset=utf-8")

    def _error(self, status: int, message: str) -> None:
        self._text(status, format_kv([("error", message)]))

    def _body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        return parse_kv(self.rfile.read(length).decode("utf-8"))

    def do_OPTIONS(self):
        self._send(204, b"", "text/plain")

    def do_POST(self):
        svc = self.server.service  # type: ignore[attr-defined]
        try:
            if self.path == "/sessions":
                body = self._body()
                session = svc.store.create_session(
                    body["labeler"], body["image"], body["part"]
                )
                self._text(200, session_view(session))
                return
            m = re.fullmatch(r"/sessions/(\d+)/trials", self.path)
            if m:
                body = self._body()
                correct, count = svc.store.record_trial(
                    int(m.group(1)), body["chosen"]
                )
                session = svc.store.session(int(m.group(1)))
                self._text(
                    200,
                    format_kv(
                        [
                            ("correct", "true" if correct else "false"),
                            ("trials", count),
                            ("closed", "true" if session.closed else "false"),
                        ]
                    ),
                )
                return
            self._error(404, "no such route")
        except KeyError as exc:
            self._error(404, str(exc).strip("'\""))
        except ValueError as exc:
            self._error(409, str(exc))

    def do_GET(self):
        svc = self.server.service  # type: ignore[attr-defined]
        try:
            m = re.fullmatch(r"/sessions/(\d+)", self.path)
            if m:
                session = svc.store.session(int(m.group(1)))
                self._text(200, session_view(session))
                return
            m = re.fullmatch(r"/sessions/(\d+)/image", self.path)
            if m:
                self._send(200, svc.masked_query_png(int(m.group(1))), "image/png")
                return
            m = re.fullmatch(r"/images/([^/]+)", self.path)
            if m:
                self._send(200, svc.gallery_png(m.group(1)), "image/png")
                return
            if self.path == "/parts":
                lines = [
                    ("part", f"{p.image_id}/{p.part_id}") for p in svc.store.parts()
                ]
                self._text(200, format_kv(lines))
                return
            m = re.fullmatch(r"/parts/([^/]+)/([^/]+)/score", self.path)
            if m:
                score, labelers = svc.store.part_score(m.group(1), m.group(2))
                self._text(
                    200,
                    format_kv([("score", repr(score)), ("labelers", labelers)]),
                )
                return
            if self.path == "/export":
                self._send(
                    200, svc.export_csv_text().encode("utf-8"), "text/csv"
                )
                return
            self._error(404, "no such route")
        except KeyError as exc:
            self._error(404, str(exc).strip("'\""))
        except ValueError as exc:
            self._error(409, str(exc))


def make_server(
    data_dir, cfg: AnnotationConfig, port: int = 0, seed: int = 0
) -> ThreadingHTTPServer:
    """Bind (port 0 picks a free one); caller runs serve_forever."""
    server = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
    server.service = AnnotationService(data_dir, cfg, seed=seed)  # type: ignore[attr-defined]
    return server
