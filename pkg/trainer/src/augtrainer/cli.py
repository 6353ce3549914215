"""Command line entry: train on a seed export, evaluate, write the reports."""

from __future__ import annotations

import argparse
import json
import sys

from .evaluate import augment_and_eval
from .train import EmptyExportError, TrainConfig, train_cgan
from .wire import WireError, load_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="augtrainer",
        description="train a conditional generator from a seed export and score it",
    )
    parser.add_argument("export_file", help="seed-export file (sidecar expected at <file>.json)")
    parser.add_argument("--out", required=True, help="quality report JSON path")
    parser.add_argument("--grid", help="also render a generated-sample grid PNG")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    parser.add_argument("--oversample", type=int, default=TrainConfig.oversample_factor)
    parser.add_argument(
        "--devices",
        default="first",
        help="'first', 'all', or comma-separated device ids to evaluate (default: first)",
    )
    return parser


def _pick_devices(sidecar: dict | None, spec: str) -> list[dict]:
    if sidecar is None or not sidecar.get("devices"):
        return []
    devices = sidecar["devices"]
    if spec == "all":
        return devices
    if spec == "first":
        return devices[:1]
    wanted = {int(tok) for tok in spec.split(",") if tok.strip()}
    return [d for d in devices if int(d["device_id"]) in wanted]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = TrainConfig(epochs=args.epochs, oversample_factor=args.oversample, seed=args.seed)
    try:
        export = load_export(args.export_file)
    except (OSError, WireError) as exc:
        print(f"error reading export: {exc}", file=sys.stderr)
        return 1
    try:
        result = train_cgan(export, cfg)
    except EmptyExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    sidecar = export.sidecar or {}
    report = augment_and_eval(
        result,
        _pick_devices(export.sidecar, args.devices),
        cfg,
        target_count=int(sidecar.get("target_count", 4)),
        full_count=int(sidecar.get("full_count", 200)),
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if args.grid:
        from .grid import save_sample_grid

        save_sample_grid(result, cfg, args.grid)
    if result.skipped_labels:
        print(f"note: labels without any delivered seed: {result.skipped_labels}", file=sys.stderr)
    print(f"f1={report.f1:.3f} recall={report.recall:.2f} devices={len(report.devices)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
