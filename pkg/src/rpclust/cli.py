"""Command-line front end.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
Artifacts go to files; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cluster import (
    ClusterConfig,
    Dendrogram,
    Linkage,
    dendrogram_to_dot,
    parse_criterion,
    read_partition_csv,
    responsiveness_pair_cluster,
)
from .crosstab import build_crosstab, read_pairs_csv, write_pairs_csv
from .errors import EmptyInput
from .evaluation import node_sweep, synthetic_purchases
from .export import dumps_geojson, partition_geojson
from .ingest import (
    DEFAULT_RULES,
    Gazetteer,
    PurchaseRecord,
    extract_purchases,
    load_rules,
    read_records,
    split_category,
    write_review_csv,
)
from .modularity import Measure, graph_from_pairs, greedy_optimize

log = logging.getLogger("rpclust")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

LINKAGE_CHOICES = [m.value for m in Linkage]
MEASURE_CHOICES = [m.value for m in Measure]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dims(text: str):
    if text.lower() == "all":
        return "all"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be a positive integer or 'all', got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("dims must be positive")
    return value


def _criterion(text: str):
    try:
        return parse_criterion(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def load_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` comments and blank lines are skipped."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            out[key.strip().replace("-", "_")] = value.strip().strip('"').strip("'")
    return out


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="rpclust", description="Responsiveness pair clustering of bipartite purchase data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("ingest", help="extract (category, city) pairs from raw records")
    p.add_argument("--records", required=True, help="CSV or JSON-lines records")
    p.add_argument("--gazetteer", required=True, help="CSV of name, lat, lon")
    p.add_argument("--rules", help="extraction ruleset file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-malformed", type=int, default=0, help="malformed records tolerated before failing")
    subs["ingest"] = p

    p = sub.add_parser("cluster", help="responsiveness pair clustering of a pairs CSV")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--linkage", choices=LINKAGE_CHOICES, default=Linkage.WARD.value)
    p.add_argument("--cut", type=_criterion, default="gap", help="gap, k=<int> or height=<float>")
    p.add_argument("--dims", type=_dims, default="all")
    subs["cluster"] = p

    p = sub.add_parser("modularity", help="greedy bipartite-modularity baseline")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--measure", choices=MEASURE_CHOICES, default=Measure.QH.value)
    subs["modularity"] = p

    p = sub.add_parser("evaluate", help="node-count sweep of R_n, clustering and greedy QH")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--pairs", help="pairs CSV whose categories read 'item _ place'")
    src.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic records")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=int, default=100)
    p.add_argument("--out", required=True)
    p.add_argument("--linkage", choices=LINKAGE_CHOICES, default=Linkage.WARD.value)
    p.add_argument("--cut", type=_criterion, default="gap")
    p.add_argument("--dims", type=_dims, default="all")
    p.add_argument("--t-test", choices=["welch", "student"], default="welch")
    subs["evaluate"] = p

    p = sub.add_parser("export-geojson", help="map overlay of city communities")
    p.add_argument("--partition", required=True, help="partition CSV from 'cluster'")
    p.add_argument("--gazetteer", required=True)
    p.add_argument("--out", required=True, help="output .geojson file")
    subs["export-geojson"] = p

    p = sub.add_parser("export-dot", help="DOT rendering of a dendrogram JSON")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--out", required=True)
    subs["export-dot"] = p
    return parser, subs


def _require_files(*paths):
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise UsageError(f"no such file: {path}")


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sidecar(out: Path, args, extra=None):
    meta = {
        "rpclust_version": __version__,
        "command": args.command,
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": {k: (repr(v) if not isinstance(v, (str, int, float, type(None))) else v)
                   for k, v in sorted(vars(args).items()) if k not in ("verbose",)},
    }
    if extra:
        meta.update(extra)
    _write(out / "run.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _cluster_config(args) -> ClusterConfig:
    dims = None if args.dims == "all" else args.dims
    return ClusterConfig(dims=dims, method=Linkage.parse(args.linkage), criterion=args.cut)


def cmd_ingest(args) -> int:
    _require_files(args.records, args.gazetteer, args.rules)
    records, errors = read_records(args.records)
    for exc in errors:
        log.warning("record %s: %s", exc.line, exc)
    if len(errors) > args.max_malformed:
        log.error("%d malformed records exceed tolerance of %d", len(errors), args.max_malformed)
        return EXIT_DATA
    if not records:
        raise EmptyInput(f"no records in {args.records}")
    gz = Gazetteer.from_csv(args.gazetteer)
    rules = load_rules(args.rules) if args.rules else DEFAULT_RULES
    purchases, review = extract_purchases(records, gz, rules)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pairs_csv(out / "pairs.csv", [(p.category, p.city) for p in purchases])
    with open(out / "purchases.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "place", "city"])
        w.writerows((p.item, p.place, p.city) for p in purchases)
    write_review_csv(out / "review.csv", review)
    _sidecar(out, args, {"pairs": len(purchases), "review": len(review), "malformed": len(errors)})
    log.info("%d pairs, %d records queued for review", len(purchases), len(review))
    return EXIT_OK


def _read_pairs(path):
    _require_files(path)
    pairs = read_pairs_csv(path)
    if not pairs:
        raise EmptyInput(f"no pairs in {path}")
    return pairs


def cmd_cluster(args) -> int:
    pairs = _read_pairs(args.pairs)
    result = responsiveness_pair_cluster(pairs, _cluster_config(args))
    out = Path(args.out)
    _write(out / "partition.csv", result.partition.to_csv())
    _write(out / "dendrogram.dot", dendrogram_to_dot(result.dendrogram))
    _write(out / "dendrogram.json", result.dendrogram.to_json())
    _write(out / "embedding.json", result.embedding.to_json())
    _write(out / "crosstab.json", build_crosstab(pairs).to_json())
    _sidecar(out, args, {"communities": result.partition.n_communities})
    return EXIT_OK


def cmd_modularity(args) -> int:
    pairs = _read_pairs(args.pairs)
    g = graph_from_pairs(pairs)
    c = greedy_optimize(g, args.measure)
    out = Path(args.out)
    _write(out / "communities.csv", c.to_csv(g))
    summary = {"measure": c.measure, "value": c.value, "communities": c.n_communities, "metadata": c.metadata}
    _write(out / "modularity.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _sidecar(out, args)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.synthetic is not None:
        records = synthetic_purchases(args.synthetic, seed=args.seed)
    elif args.pairs is not None:
        records = []
        for category, city in _read_pairs(args.pairs):
            item, place = split_category(category)
            records.append(PurchaseRecord(item, place, city))
    else:
        raise UsageError("evaluate needs --pairs or --synthetic")
    report = node_sweep(records, step=args.step, config=_cluster_config(args), variant=args.t_test)
    out = Path(args.out)
    _write(out / "report.json", report.to_json())
    _write(out / "report.csv", report.to_csv())
    _sidecar(out, args)
    return EXIT_OK


def cmd_export_geojson(args) -> int:
    _require_files(args.partition, args.gazetteer)
    rows = read_partition_csv(args.partition)
    gz = Gazetteer.from_csv(args.gazetteer)
    _write(Path(args.out), dumps_geojson(partition_geojson(rows, gz)))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    _require_files(args.dendrogram)
    with open(args.dendrogram, encoding="utf-8") as fh:
        dendro = Dendrogram.from_dict(json.load(fh))
    _write(Path(args.out), dendrogram_to_dot(dendro))
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "modularity": cmd_modularity,
    "evaluate": cmd_evaluate,
    "export-geojson": cmd_export_geojson,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            if not Path(known.config).is_file():
                raise UsageError(f"no such file: {known.config}")
            values = load_config_file(known.config)
            for sp in subs.values():
                dests = {a.dest: a for a in sp._actions}
                applicable = {}
                for k, v in values.items():
                    action = dests.get(k)
                    if action is None:
                        continue
                    if action.choices is not None and v not in action.choices:
                        valid = ", ".join(map(str, action.choices))
                        raise UsageError(f"{k}={v!r} in {known.config}; valid values: {valid}")
                    applicable[k] = action.type(v) if action.type is not None else v
                    # file values satisfy required flags
                    action.required = False
                sp.set_defaults(**applicable)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"rpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as exc:
        print(f"rpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # argparse exits on --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"rpclust: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"rpclust: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
