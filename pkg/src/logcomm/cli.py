"""Command-line pipeline: stages exchange files in one artifact directory.

Exit codes: 0 success, 1 usage/config/data errors, 2 missing upstream
artifact.  A TOML config file can pre-set any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import artifacts as art
from .analysis import SammonConfig, complete_linkage, merge_heights, sammon
from .evaluate import distance_matrix, rank_sessions, resolve_split_size, score_objects, split_membership
from .graph import build_similarity, graph_stats
from .ingest import ParseError, SessionizationConfig, filter_records, parse_log, sessionize
from .spectral import ConvergenceError, PowerIterConfig, find_communities
from .synth import PlantedConfig, generate_planted_log

PIPELINE_STAGES = ("sessionize", "graph", "communities", "distances", "labels", "cluster", "project", "report")


class CliError(Exception):
    exit_code = 1


class ConfigError(CliError):
    exit_code = 1

    def __init__(self, field: str, message: str):
        super().__init__(f"invalid config: {field}: {message}")
        self.field = field


class MissingArtifact(CliError):
    exit_code = 2

    def __init__(self, path: Path):
        super().__init__(f"missing artifact: {path}")
        self.path = path


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; exit code 2 is reserved for missing artifacts
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p: _Parser) -> None:
    p.add_argument("--out", help="artifact directory")
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--seed", type=int, help="seed for all randomised stages (default 0)")
    p.add_argument("--threads", type=int, help="worker threads (default: available cores)")


def _add_ingest_opts(p: _Parser) -> None:
    p.add_argument("--input", help="log file (default: <out>/log.csv when present)")
    p.add_argument("--format", choices=("csv", "clf"), help="log format (default csv)")
    p.add_argument("--threshold", type=int, help="inactivity threshold in seconds (default 1800)")
    p.add_argument("--filter", help="allow-list file of object ids, one per line")
    p.add_argument("--strict", action="store_true", default=None, help="abort on malformed lines")


def _add_graph_opts(p: _Parser) -> None:
    p.add_argument(
        "--popular-cutoff", type=float, dest="popular_cutoff",
        help="drop objects present in more than this fraction of sessions (default 1.0 = keep all)",
    )


def _add_spectral_opts(p: _Parser) -> None:
    p.add_argument("--k", type=int, help="number of communities (default 10)")
    p.add_argument("--tolerance", type=float, help="residual tolerance (default 1e-10)")
    p.add_argument("--max-iterations", type=int, dest="max_iterations",
                   help="iteration cap per eigenpair (default 10000)")
    p.add_argument("--split-poles", action="store_true", default=None, dest="split_poles",
                   help="emit one community per sign pole of non-principal eigenvectors")


def _add_label_opts(p: _Parser) -> None:
    p.add_argument("--split", help="member/non-member split size: a count or 'half' (default half)")
    p.add_argument("--catalog", help="object_id,category CSV for category scores")


def _add_sammon_opts(p: _Parser) -> None:
    p.add_argument("--sammon-iterations", type=int, dest="sammon_iterations",
                   help="projection iteration cap (default 500)")
    p.add_argument("--sammon-step", type=float, dest="sammon_step",
                   help="projection step factor (default 0.3)")
    p.add_argument("--sammon-threshold", type=float, dest="sammon_threshold",
                   help="stop when a step improves stress by less than this (default 1e-9)")


def _add_synth_opts(p: _Parser) -> None:
    p.add_argument("--groups", type=int, help="planted groups (default 3)")
    p.add_argument("--sessions-per-group", type=int, dest="sessions_per_group",
                   help="sessions per group (default 50)")
    p.add_argument("--objects-per-group", type=int, dest="objects_per_group",
                   help="objects per group pool (default 100)")
    p.add_argument("--accesses", help="requests per session as MIN:MAX (default 10:30)")
    p.add_argument("--noise", type=float, help="chance a request leaves its group pool (default 0)")


def build_parser() -> _Parser:
    parser = _Parser(prog="logcomm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    stage_opts = {
        "sessionize": (_add_ingest_opts,),
        "graph": (_add_graph_opts,),
        "communities": (_add_spectral_opts,),
        "distances": (),
        "labels": (_add_label_opts,),
        "cluster": (),
        "project": (_add_sammon_opts,),
        "report": (),
        "synth": (_add_synth_opts,),
        "pipeline": (_add_ingest_opts, _add_graph_opts, _add_spectral_opts, _add_label_opts, _add_sammon_opts),
    }
    helps = {
        "sessionize": "parse a log and cut it into sessions",
        "graph": "build the session-overlap graph",
        "communities": "compute the community spectrum",
        "distances": "rank sessions and compute community distances",
        "labels": "score objects and categories per community",
        "cluster": "complete-linkage clustering of communities",
        "project": "2-d stress-minimising projection of communities",
        "report": "bundle reporting artifacts with a manifest",
        "synth": "generate a synthetic log with planted communities",
        "pipeline": "run all stages in order",
    }
    for name, extras in stage_opts.items():
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        for add in extras:
            add(p)
    return parser


class Options:
    """Flag values layered over config-file values over defaults."""

    def __init__(self, args: argparse.Namespace):
        self._args = vars(args)
        self.file_values = {}
        config = self._args.get("config")
        if config is not None:
            path = Path(config)
            if not path.is_file():
                raise ConfigError("config", f"unreadable file {path}")
            try:
                self.file_values = tomllib.loads(path.read_text(encoding="utf-8"))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError("config", f"invalid TOML: {exc}") from None

    def get(self, name, default=None):
        value = self._args.get(name)
        if value is None:
            value = self.file_values.get(name, default)
        return value

    def require_positive_int(self, name, default):
        value = self.get(name, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ConfigError(name, f"must be a positive integer, got {value!r}")
        return value

    def require_positive_float(self, name, default):
        value = self.get(name, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            raise ConfigError(name, f"must be a positive number, got {value!r}")
        return float(value)

    def path(self, name, default=None):
        value = self.get(name, default)
        if value is None:
            return None
        path = Path(value)
        if not path.is_file():
            raise ConfigError(name, f"unreadable file {path}")
        return path

    def out_dir(self) -> Path:
        value = self.get("out")
        if value is None:
            raise ConfigError("out", "an artifact directory is required")
        out = Path(value)
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise ConfigError("out", f"directory {out} is not writable")
        return out

    def seed(self) -> int:
        value = self.get("seed", 0)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError("seed", f"must be an integer, got {value!r}")
        return value

    def threads(self) -> int:
        return self.require_positive_int("threads", os.cpu_count() or 1)


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingArtifact(path)
    return path


def _read_sessions(out: Path):
    return art.read_sessions(_require(out / art.SESSIONS_FILE))


# ------------------------------------------------------------------ stages

def stage_sessionize(opts: Options, out: Path) -> None:
    input_value = opts.get("input")
    if input_value is None:
        candidate = out / art.LOG_FILE
        if not candidate.is_file():
            raise ConfigError("input", "no log file given and no log.csv in the artifact directory")
        input_path = candidate
    else:
        input_path = Path(input_value)
        if not input_path.is_file():
            raise ConfigError("input", f"unreadable file {input_path}")
    fmt = opts.get("format", "csv")
    if fmt not in ("csv", "clf"):
        raise ConfigError("format", f"must be 'csv' or 'clf', got {fmt!r}")
    threshold = opts.require_positive_int("threshold", 1800)
    strict = bool(opts.get("strict", False))

    result = parse_log(input_path.read_bytes(), fmt, strict=strict)
    records = result.records
    filter_path = opts.path("filter")
    if filter_path is not None:
        allowed = art.read_object_filter(filter_path)
        records = filter_records(records, allowed.__contains__)
    sessions = sessionize(records, SessionizationConfig(threshold))
    art.write_sessions(out / art.SESSIONS_FILE, sessions)
    art.write_rejects(out / art.REJECTS_FILE, result.rejects)
    print(
        f"sessionize: {len(sessions)} sessions from {len(records)} records "
        f"({len(result.rejects)} rejected lines) -> {art.SESSIONS_FILE}"
    )


def stage_graph(opts: Options, out: Path) -> None:
    sessions = _read_sessions(out)
    cutoff = opts.require_positive_float("popular_cutoff", 1.0)
    if cutoff > 1.0:
        raise ConfigError("popular_cutoff", f"must be in (0, 1], got {cutoff}")
    graph = build_similarity(sessions, popular_fraction=cutoff, threads=opts.threads())
    art.write_edges(out / art.EDGES_FILE, graph)
    stats = graph_stats(graph)
    art.write_categories(  # plain JSON writer
        out / art.GRAPH_STATS_FILE,
        {
            "n_nodes": stats.n_nodes,
            "n_edges": stats.n_edges,
            "weight_histogram": list(stats.weight_histogram),
            "n_components": stats.n_components,
            "n_isolated": stats.n_isolated,
        },
    )
    print(
        f"graph: {stats.n_nodes} nodes, {stats.n_edges} edges, "
        f"{stats.n_components} components ({stats.n_isolated} isolated) -> {art.EDGES_FILE}"
    )


def stage_communities(opts: Options, out: Path) -> None:
    sessions = _read_sessions(out)
    graph = art.read_graph(_require(out / art.EDGES_FILE), sessions)
    config = PowerIterConfig(
        k=opts.require_positive_int("k", 10),
        tolerance=opts.require_positive_float("tolerance", 1e-10),
        max_iterations=opts.require_positive_int("max_iterations", 10_000),
        seed=opts.seed(),
    )
    if config.k > graph.n:
        raise ConfigError("k", f"{config.k} exceeds the session count {graph.n}")
    spectrum = find_communities(graph, config, split_poles=bool(opts.get("split_poles", False)))
    art.write_spectrum(out / art.SPECTRUM_FILE, spectrum)
    top = spectrum.communities[0].eigenvalue if spectrum.communities else 0.0
    print(f"communities: {len(spectrum)} eigenpairs (leading eigenvalue {top:.6g}) -> {art.SPECTRUM_FILE}")


def stage_distances(opts: Options, out: Path) -> None:
    spectrum = art.read_spectrum(_require(out / art.SPECTRUM_FILE))
    rank_paths = art.write_ranks(out, spectrum)
    dm = distance_matrix(spectrum)
    art.write_distance_matrix(out / art.DISTANCE_FILE, dm)
    print(f"distances: {len(rank_paths)} rank tables, {dm.k}x{dm.k} matrix -> {art.DISTANCE_FILE}")


def stage_labels(opts: Options, out: Path) -> None:
    sessions = _read_sessions(out)
    spectrum = art.read_spectrum(_require(out / art.SPECTRUM_FILE))
    split_request = opts.get("split", "half")
    catalog_path = opts.path("catalog")
    catalog = art.read_catalog(catalog_path) if catalog_path is not None else None

    try:
        size = resolve_split_size(split_request, spectrum.n)
        if 2 * size > spectrum.n:
            raise ValueError(f"2n = {2 * size} exceeds the session count {spectrum.n}")
    except ValueError as exc:
        raise ConfigError("split", str(exc)) from None

    zero_in_all = None
    report_communities = []
    for community in spectrum.communities:
        split = split_membership(community.authority, spectrum.session_ids, size)
        scores = score_objects(split, sessions, catalog)
        zero_here = community.authority == 0.0
        zero_in_all = zero_here if zero_in_all is None else (zero_in_all & zero_here)
        entry = {
            "community": art.community_label(community.index),
            "eigenvalue": community.eigenvalue,
            "members": len(split.members),
            "non_members": len(split.non_members),
            "indifferent": len(split.indifferent),
            "zero_weight_sessions": int(zero_here.sum()),
            "top_objects": [{"object_id": o, "score": s} for o, s in scores.top_objects(10)],
            "bottom_objects": [{"object_id": o, "score": s} for o, s in scores.bottom_objects(10)],
        }
        if scores.category_scores is not None:
            entry["best_categories"] = [
                {"category": c, "score": s} for c, s in scores.best_categories(3)
            ]
            entry["worst_categories"] = [
                {"category": c, "score": s} for c, s in scores.worst_categories(3)
            ]
        report_communities.append(entry)

    report = {
        "split": {"requested": split_request, "n": size},
        "sessions_zero_in_all_communities": int(zero_in_all.sum()) if zero_in_all is not None else 0,
        "communities": report_communities,
    }
    art.write_categories(out / art.CATEGORIES_FILE, report)
    kinds = "categories" if catalog is not None else "objects"
    print(f"labels: scored {kinds} for {len(report_communities)} communities -> {art.CATEGORIES_FILE}")


def stage_cluster(opts: Options, out: Path) -> None:
    dm = art.read_distance_matrix(_require(out / art.DISTANCE_FILE))
    dendrogram = complete_linkage(dm)
    art.write_dendrogram(out / art.DENDROGRAM_FILE, dendrogram)
    art.write_merge_heights(out / art.MERGE_HEIGHTS_FILE, merge_heights(dendrogram))
    print(f"cluster: {len(dendrogram.merges)} merges -> {art.DENDROGRAM_FILE}")


def stage_project(opts: Options, out: Path) -> None:
    dm = art.read_distance_matrix(_require(out / art.DISTANCE_FILE))
    config = SammonConfig(
        max_iterations=opts.require_positive_int("sammon_iterations", 500),
        step=opts.require_positive_float("sammon_step", 0.3),
        stress_threshold=opts.require_positive_float("sammon_threshold", 1e-9),
        seed=opts.seed(),
    )
    embedding = sammon(dm, config)
    art.write_embedding(out / art.EMBEDDING_FILE, out / art.EMBEDDING_META_FILE, embedding, dm.labels)
    print(
        f"project: stress {embedding.stress:.3e} after {embedding.iterations} iterations "
        f"-> {art.EMBEDDING_FILE}"
    )


def stage_report(opts: Options, out: Path) -> None:
    spectrum = art.read_spectrum(_require(out / art.SPECTRUM_FILE))
    bundle = [out / art.ranks_file(c.index) for c in spectrum.communities]
    bundle += [
        out / art.DISTANCE_FILE,
        out / art.CATEGORIES_FILE,
        out / art.DENDROGRAM_FILE,
        out / art.MERGE_HEIGHTS_FILE,
        out / art.EMBEDDING_FILE,
        out / art.EMBEDDING_META_FILE,
    ]
    report_dir = out / art.REPORT_DIR
    report_dir.mkdir(exist_ok=True)
    copies = []
    for path in bundle:
        _require(path)
        copy = report_dir / path.name
        shutil.copyfile(path, copy)
        copies.append(copy)

    stage_files = [
        out / art.SESSIONS_FILE,
        out / art.REJECTS_FILE,
        out / art.EDGES_FILE,
        out / art.GRAPH_STATS_FILE,
        out / art.SPECTRUM_FILE,
    ]
    tracked = [p for p in stage_files if p.is_file()] + bundle + copies
    art.write_manifest(report_dir / art.MANIFEST_FILE, out, tracked)
    print(f"report: bundled {len(copies)} artifacts -> {art.REPORT_DIR}/{art.MANIFEST_FILE}")


def stage_synth(opts: Options, out: Path) -> None:
    accesses = opts.get("accesses", "10:30")
    if isinstance(accesses, str):
        parts = accesses.split(":")
        try:
            if len(parts) == 1:
                lo = hi = int(parts[0])
            elif len(parts) == 2:
                lo, hi = int(parts[0]), int(parts[1])
            else:
                raise ValueError
        except ValueError:
            raise ConfigError("accesses", f"expected MIN:MAX, got {accesses!r}") from None
    else:
        raise ConfigError("accesses", f"expected MIN:MAX, got {accesses!r}")
    noise = opts.get("noise", 0.0)
    if not isinstance(noise, (int, float)) or isinstance(noise, bool):
        raise ConfigError("noise", f"must be a number, got {noise!r}")
    try:
        config = PlantedConfig(
            groups=opts.require_positive_int("groups", 3),
            sessions_per_group=opts.require_positive_int("sessions_per_group", 50),
            objects_per_group=opts.require_positive_int("objects_per_group", 100),
            accesses_min=lo,
            accesses_max=hi,
            cross_group_noise=float(noise),
            seed=opts.seed(),
        )
    except ValueError as exc:
        raise ConfigError("synth", str(exc)) from None
    records, truth = generate_planted_log(config)
    art.write_log_csv(out / art.LOG_FILE, records)
    art.write_groundtruth(out / art.GROUNDTRUTH_FILE, truth)
    print(f"synth: {len(records)} records, {len(truth)} planted sessions -> {art.LOG_FILE}")


def stage_pipeline(opts: Options, out: Path) -> None:
    for name in PIPELINE_STAGES:
        _STAGES[name](opts, out)


_STAGES = {
    "sessionize": stage_sessionize,
    "graph": stage_graph,
    "communities": stage_communities,
    "distances": stage_distances,
    "labels": stage_labels,
    "cluster": stage_cluster,
    "project": stage_project,
    "report": stage_report,
    "synth": stage_synth,
    "pipeline": stage_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    try:
        opts = Options(args)
        out = opts.out_dir()
        _STAGES[args.command](opts, out)
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ParseError, ConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
