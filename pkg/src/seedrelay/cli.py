"""Command line interface: run, sweep, export-seeds, mds.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 runtime error.
Given the same config and seed, every command writes byte-identical output,
whatever the `--jobs` setting.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import codec, privacy, simulator, topology
from .config import ConfigError, load_sim_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_RUNTIME = 4


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="config file (defaults apply if omitted)")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", metavar="PATH", help="output file (stdout for run if omitted)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="config override, e.g. --set rho=0.05 or --set channel.tx_power_w=0.1",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedrelay",
        description="simulate multi-hop collection of compressed seed samples and score privacy/latency",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one simulation round, report as JSON")
    _common_flags(p_run)
    p_run.add_argument("--topology-file", metavar="PATH", help="load a fixed topology instead of placing devices")

    p_sweep = sub.add_parser("sweep", help="Monte-Carlo sweep over one axis, table as CSV")
    _common_flags(p_sweep)
    p_sweep.add_argument("--axis", required=True, help=f"one of {', '.join(simulator.SWEEP_AXES)}")
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values (inf allowed for tau)")
    p_sweep.add_argument("--seeds", type=int, default=1, help="seeds per axis value")
    p_sweep.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")

    p_exp = sub.add_parser("export-seeds", help="run once and write the delivered seed set + sidecar")
    _common_flags(p_exp)
    p_exp.add_argument("--topology-file", metavar="PATH")

    p_mds = sub.add_parser("mds", help="embed an exported seed set, write id,x,y,label CSV")
    _common_flags(p_mds)
    p_mds.add_argument("export_file", help="seed-export file written by export-seeds")
    p_mds.add_argument("--plot", action="store_true", help="also render a scatter PNG next to the CSV")

    return parser


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IoFailure(f"cannot write {path}: {exc}") from exc


class _IoFailure(Exception):
    pass


def _load_config(args) -> simulator.SimConfig:
    try:
        return load_sim_config(args.config, args.overrides, args.seed)
    except FileNotFoundError as exc:
        raise _IoFailure(f"config file not found: {exc.filename}") from exc


def _load_topology(path: str | None):
    if path is None:
        return None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return topology.from_text(fh.read())
    except FileNotFoundError as exc:
        raise _IoFailure(f"topology file not found: {exc.filename}") from exc
    except topology.TopologyFormatError as exc:
        raise ConfigError(f"bad topology file {path}: {exc}") from exc


def report_json(report: simulator.SimReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(simulator.sweep_header())
    for row in rows:
        writer.writerow(row.csv_cells())
    return buf.getvalue()


def _cmd_run(args) -> int:
    config = _load_config(args)
    fixed = _load_topology(args.topology_file)
    if fixed is not None and fixed.n_devices != config.n_devices:
        raise ConfigError(
            f"topology file has {fixed.n_devices} devices but config says n={config.n_devices}"
        )
    report = simulator.run(config, fixed_topology=fixed)
    _write_text(args.out, report_json(report))
    return EXIT_OK


def _parse_values(text: str) -> list[float]:
    values = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            values.append(float(tok))
        except ValueError:
            raise ConfigError(f"bad axis value {tok!r}") from None
    if not values:
        raise ConfigError("no axis values given")
    return values


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    values = _parse_values(args.values)
    try:
        rows = simulator.sweep(config, args.axis, values, args.seeds, jobs=max(1, args.jobs))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = sweep_csv(rows)
    _write_text(args.out, text)
    if args.plot:
        if args.out is None:
            raise ConfigError("--plot needs --out to name the figure")
        from . import plots

        png = _sibling(args.out, ".png")
        plots.render_sweep_figure(rows, png)
        print(f"figure written to {png}", file=sys.stderr)
    return EXIT_OK


def _sibling(path: str, suffix: str) -> str:
    stem = path[: path.rfind(".")] if "." in path.split("/")[-1] else path
    return stem + suffix


def _cmd_export_seeds(args) -> int:
    if args.out is None:
        raise ConfigError("export-seeds needs --out")
    config = _load_config(args)
    fixed = _load_topology(args.topology_file)
    report = simulator.run(config, fixed_topology=fixed)
    blob, sidecar = simulator.export_inbox(report)
    if report.delivered_sample_count == 0:
        print("warning: no samples met the deadline; export holds only a header", file=sys.stderr)
    try:
        with open(args.out, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise _IoFailure(f"cannot write {args.out}: {exc}") from exc
    _write_text(args.out + ".json", json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _cmd_mds(args) -> int:
    try:
        with open(args.export_file, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise _IoFailure(f"cannot read {args.export_file}: {exc}") from exc
    samples, _sdi = codec.decode_payload(blob)
    if len(samples) < 2:
        raise _RuntimeFailure(f"embedding needs at least 2 samples, export holds {len(samples)}")
    images = np.stack([s.to_image() for s in samples])
    labels = np.array([s.label for s in samples])
    coords = privacy.classical_mds(privacy.pairwise_distances(images), dim=2)

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "x", "y", "label"])
    for i, (pt, lab) in enumerate(zip(coords, labels)):
        writer.writerow([i, repr(float(pt[0])), repr(float(pt[1])), int(lab)])
    _write_text(args.out, buf.getvalue())
    if args.plot:
        if args.out is None:
            raise ConfigError("--plot needs --out to name the figure")
        from . import plots

        png = _sibling(args.out, ".png")
        plots.render_mds_figure(coords, labels, png)
        print(f"figure written to {png}", file=sys.stderr)
    return EXIT_OK


class _RuntimeFailure(Exception):
    pass


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "export-seeds": _cmd_export_seeds,
        "mds": _cmd_mds,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _IoFailure as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (_RuntimeFailure, codec.CodecError, privacy.DegenerateEmbeddingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
