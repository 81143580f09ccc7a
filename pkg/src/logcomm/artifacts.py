"""Readers and writers for the on-disk artifacts the pipeline stages exchange.

All output is deterministic: fixed field order, ``repr`` floats (shortest
round-trip form), LF newlines, no timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .analysis import Dendrogram, Embedding2D
from .evaluate import DistanceMatrix
from .graph import SessionGraph, from_edges
from .ingest import AccessRecord, RejectedLine, Session
from .spectral import Community, CommunitySpectrum, PowerIterConfig

SESSIONS_FILE = "sessions.jsonl"
REJECTS_FILE = "rejects.csv"
EDGES_FILE = "edges.csv"
GRAPH_STATS_FILE = "graph_stats.json"
SPECTRUM_FILE = "spectrum.json"
DISTANCE_FILE = "distance_matrix.csv"
CATEGORIES_FILE = "categories.json"
DENDROGRAM_FILE = "dendrogram.json"
MERGE_HEIGHTS_FILE = "merge_heights.csv"
EMBEDDING_FILE = "embedding.csv"
EMBEDDING_META_FILE = "embedding.json"
LOG_FILE = "log.csv"
GROUNDTRUTH_FILE = "groundtruth.csv"
MANIFEST_FILE = "manifest.json"
REPORT_DIR = "report"


def community_label(index: int) -> str:
    return f"C{index + 1}"


def ranks_file(index: int) -> str:
    return f"ranks_{community_label(index)}.csv"


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")


def _csv_text(rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(rows)
    return buffer.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, indent=2) + "\n"


# ---------------------------------------------------------------- sessions

def write_sessions(path: Path, sessions: Sequence[Session]) -> None:
    lines = []
    for s in sessions:
        lines.append(
            json.dumps(
                {
                    "session_id": s.session_id,
                    "user_id": s.user_id,
                    "requests": [[ts, obj] for ts, obj in s.requests],
                },
                separators=(",", ":"),
            )
        )
    _write_text(path, "".join(line + "\n" for line in lines))


def read_sessions(path: Path) -> list[Session]:
    sessions = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        sessions.append(
            Session.from_requests(raw["session_id"], raw["user_id"], raw["requests"])
        )
    return sessions


def write_rejects(path: Path, rejects: Sequence[RejectedLine]) -> None:
    rows = [("line_number", "reason")]
    rows.extend((r.line_number, r.reason) for r in rejects)
    _write_text(path, _csv_text(rows))


# ------------------------------------------------------------------- graph

def write_edges(path: Path, graph: SessionGraph) -> None:
    src, dst, weight = graph.edge_arrays()
    rows = [("p", "q", "weight")]
    rows.extend((int(p), int(q), repr(float(w))) for p, q, w in zip(src, dst, weight))
    _write_text(path, _csv_text(rows))


def read_edges(path: Path):
    src, dst, weight = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["p", "q", "weight"]:
            raise ValueError(f"{path}: expected edge-list header 'p,q,weight'")
        for row in reader:
            src.append(int(row[0]))
            dst.append(int(row[1]))
            weight.append(float(row[2]))
    return np.asarray(src, np.int64), np.asarray(dst, np.int64), np.asarray(weight, np.float64)


def read_graph(edges_path: Path, sessions: Sequence[Session]) -> SessionGraph:
    src, dst, weight = read_edges(edges_path)
    return from_edges([s.session_id for s in sessions], src, dst, weight)


# ---------------------------------------------------------------- spectrum

def write_spectrum(path: Path, spectrum: CommunitySpectrum) -> None:
    payload = {
        "n": spectrum.n,
        "session_ids": [int(i) for i in spectrum.session_ids],
        "config": {
            "k": spectrum.config.k,
            "tolerance": spectrum.config.tolerance,
            "max_iterations": spectrum.config.max_iterations,
            "seed": spectrum.config.seed,
        },
        "communities": [
            {
                "index": c.index,
                "eigenvalue": c.eigenvalue,
                "authority": [float(x) for x in c.authority],
                "hub": [float(x) for x in c.hub],
            }
            for c in spectrum.communities
        ],
    }
    _write_text(path, _json_text(payload))


def read_spectrum(path: Path) -> CommunitySpectrum:
    raw = json.loads(path.read_text(encoding="utf-8"))
    communities = tuple(
        Community(
            index=c["index"],
            eigenvalue=float(c["eigenvalue"]),
            authority=np.asarray(c["authority"], np.float64),
            hub=np.asarray(c["hub"], np.float64),
        )
        for c in raw["communities"]
    )
    return CommunitySpectrum(
        communities=communities,
        n=int(raw["n"]),
        session_ids=np.asarray(raw["session_ids"], np.int64),
        config=PowerIterConfig(**raw["config"]),
    )


# ------------------------------------------------------------------- ranks

def write_ranks(directory: Path, spectrum: CommunitySpectrum) -> list[Path]:
    from .evaluate import rank_sessions

    paths = []
    for community in spectrum.communities:
        ranks = rank_sessions(community)
        order = np.lexsort((spectrum.session_ids, ranks))
        rows = [("session_id", "rank", "weight")]
        for i in order:
            rows.append(
                (
                    int(spectrum.session_ids[i]),
                    repr(float(ranks[i])),
                    repr(float(community.authority[i])),
                )
            )
        path = directory / ranks_file(community.index)
        _write_text(path, _csv_text(rows))
        paths.append(path)
    return paths


def read_ranks(path: Path):
    """(session_ids, ranks, weights) arrays as stored."""
    sids, ranks, weights = [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["session_id", "rank", "weight"]:
            raise ValueError(f"{path}: expected rank-table header 'session_id,rank,weight'")
        for row in reader:
            sids.append(int(row[0]))
            ranks.append(float(row[1]))
            weights.append(float(row[2]))
    return (
        np.asarray(sids, np.int64),
        np.asarray(ranks, np.float64),
        np.asarray(weights, np.float64),
    )


# --------------------------------------------------------------- distances

def write_distance_matrix(path: Path, dm: DistanceMatrix) -> None:
    labels = [community_label(i) for i in dm.labels]
    rows = [[""] + labels]
    for label, row in zip(labels, dm.values):
        rows.append([label] + [repr(float(v)) for v in row])
    _write_text(path, _csv_text(rows))


def read_distance_matrix(path: Path) -> DistanceMatrix:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "":
            raise ValueError(f"{path}: expected a labelled square matrix")
        labels = header[1:]
        values = []
        for row in reader:
            values.append([float(v) for v in row[1:]])
    matrix = np.asarray(values, np.float64)
    if matrix.shape != (len(labels), len(labels)):
        raise ValueError(f"{path}: matrix is not square")
    indices = tuple(int(label.lstrip("C")) - 1 for label in labels)
    return DistanceMatrix(values=matrix, labels=indices)


# ---------------------------------------------------------------- analysis

def write_categories(path: Path, report: Mapping) -> None:
    _write_text(path, _json_text(report))


def write_dendrogram(path: Path, dendrogram: Dendrogram) -> None:
    payload = {
        "merges": [
            {
                "a": [community_label(i) for i in m.cluster_a],
                "b": [community_label(i) for i in m.cluster_b],
                "height": m.height,
            }
            for m in dendrogram.merges
        ],
        "tree": _label_tree(dendrogram.to_tree()),
    }
    _write_text(path, _json_text(payload))


def _label_tree(node: dict) -> dict:
    out = {
        "members": [community_label(i) for i in node["members"]],
        "height": node["height"],
    }
    if "children" in node:
        out["children"] = [_label_tree(c) for c in node["children"]]
    return out


def write_merge_heights(path: Path, heights: Sequence[float]) -> None:
    rows = [("step", "height")]
    rows.extend((i + 1, repr(float(h))) for i, h in enumerate(heights))
    _write_text(path, _csv_text(rows))


def write_embedding(
    csv_path: Path, meta_path: Path, embedding: Embedding2D, labels: Sequence[int]
) -> None:
    rows = [("community", "x", "y")]
    for index, (x, y) in zip(labels, embedding.points):
        rows.append((community_label(index), repr(float(x)), repr(float(y))))
    _write_text(csv_path, _csv_text(rows))
    meta = {
        "stress": embedding.stress,
        "iterations": embedding.iterations,
        "mean_pairwise_distance": embedding.mean_pairwise_distance,
    }
    _write_text(meta_path, _json_text(meta))


# ------------------------------------------------------------ inputs/synth

def write_log_csv(path: Path, records: Sequence[AccessRecord]) -> None:
    rows = [("timestamp", "user_id", "object_id")]
    rows.extend((r.timestamp, r.user_id, r.object_id) for r in records)
    _write_text(path, _csv_text(rows))


def write_groundtruth(path: Path, truth: Mapping[str, int]) -> None:
    rows = [("user_id", "group")]
    rows.extend((user, group) for user, group in truth.items())
    _write_text(path, _csv_text(rows))


def read_catalog(path: Path) -> dict[str, frozenset[str]]:
    """object_id -> category labels; multiple rows per object accumulate."""
    pairs: dict[str, set[str]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_number, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if line_number == 1 and [f.strip() for f in row] == ["object_id", "category"]:
                continue
            if len(row) != 2:
                raise ValueError(f"{path} line {line_number}: expected 'object_id,category'")
            obj, category = row[0].strip(), row[1].strip()
            if not obj or not category:
                raise ValueError(f"{path} line {line_number}: empty object_id or category")
            pairs.setdefault(obj, set()).add(category)
    return {obj: frozenset(cats) for obj, cats in pairs.items()}


def read_object_filter(path: Path) -> frozenset[str]:
    """Allow-list of object ids, one per line."""
    ids = (line.strip() for line in path.read_text(encoding="utf-8").splitlines())
    return frozenset(i for i in ids if i)


# ---------------------------------------------------------------- manifest

def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(manifest_path: Path, root: Path, files: Iterable[Path]) -> None:
    """List every artifact with its content hash, paths relative to ``root``."""
    entries = []
    for path in files:
        entries.append(
            {
                "path": path.relative_to(root).as_posix(),
                "bytes": path.stat().st_size,
                "sha256": sha256_file(path),
            }
        )
    entries.sort(key=lambda e: e["path"])
    _write_text(manifest_path, _json_text({"artifacts": entries}))
