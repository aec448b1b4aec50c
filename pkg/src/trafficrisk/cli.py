"""Command-line interface.

Subcommands: ingest (parse + summarize), synth (generate scenes), risk
(per-ego risk series CSVs), eval (corpus correlation study), compare
(pairwise configuration matrix). Exit codes: 0 success, 1 internal error,
2 input/parse error, 3 empty-result condition.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .autoencoder import AeModel, load_model, save_model
from .config import (
    SSM_CONFIGS,
    AeVariant,
    ModelConfig,
    parse_model_id,
)
from .errors import MismatchedCorpora, NoEgoCandidates, TrafficRiskError
from .ingest import (
    exclude_truck_lane_changes,
    load_generic_scene,
    parse_highd,
    write_generic,
    write_scene_meta,
)
from .stats import CorrelationResult, compare_configs, evaluate_corpus
from .risk import risk_timeseries, train_corpus_ae
from .trajectory import Scene

DATA_DIR_ENV = "TRAFFICRISK_DATA_DIR"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_EMPTY = 3


def _fmt(value: float) -> str:
    return repr(float(value))


def _load_json(path: str | Path, what: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise TrafficRiskError(f"bad {what} {path}: {e}") from None


def _add_scene_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--format", choices=["highd", "generic"], default="generic", help="input format"
    )
    p.add_argument("scenes", nargs="*", help="generic scene CSVs (or directories)")
    p.add_argument("--recording", help="drone-dataset recording number, e.g. 01")
    p.add_argument(
        "--data-dir",
        default=os.environ.get(DATA_DIR_ENV, "."),
        help=f"dataset directory (default: ${DATA_DIR_ENV} or .)",
    )
    p.add_argument(
        "--layout",
        help="lane-layout JSON for generic CSVs without a .meta.json sidecar",
    )
    p.add_argument(
        "--frame-rate", type=float, help="frame rate (Hz) when using --layout"
    )
    p.add_argument(
        "--keep-truck-lane-changes",
        action="store_true",
        help="skip the truck lane-change exclusion filter",
    )


def _load_scenes(args) -> list[Scene]:
    scenes: list[Scene] = []
    if args.format == "highd":
        if not args.recording:
            raise TrafficRiskError("--format highd requires --recording NN")
        base = Path(args.data_dir)
        rec = args.recording
        scenes.append(
            parse_highd(
                base / f"{rec}_tracks.csv",
                base / f"{rec}_tracksMeta.csv",
                base / f"{rec}_recordingMeta.csv",
            )
        )
    else:
        paths: list[Path] = []
        for entry in args.scenes:
            p = Path(entry)
            if p.is_dir():
                paths.extend(sorted(p.glob("*.csv")))
            else:
                paths.append(p)
        if not paths:
            raise TrafficRiskError("no scene files given")
        if args.layout:
            if not args.frame_rate:
                raise TrafficRiskError("--layout requires --frame-rate")
            from .ingest import layout_from_dict, parse_generic

            layout = layout_from_dict(_load_json(args.layout, "layout file"))
            for p in paths:
                scenes.append(
                    parse_generic(p, layout, args.frame_rate, recording_id=p.stem)
                )
        else:
            for p in paths:
                scenes.append(load_generic_scene(p))
    if not args.keep_truck_lane_changes:
        scenes = [exclude_truck_lane_changes(s) for s in scenes]
    return scenes


def cmd_ingest(args) -> int:
    scenes = _load_scenes(args)
    for scene in scenes:
        lo, hi = scene.frame_range
        duration = (hi - lo + 1) / scene.frame_rate if hi >= lo else 0.0
        print(f"scene {scene.recording_id}: {len(scene.tracks)} tracks")
        print(f"  frame rate: {scene.frame_rate} Hz, duration: {duration:.2f} s")
        for lane in scene.layout.lanes:
            print(
                f"  lane {lane.lane_id}: [{lane.lower:.2f}, {lane.upper:.2f}] m "
                f"{lane.direction.value}"
            )
    if args.write_generic:
        out = Path(args.write_generic)
        out.mkdir(parents=True, exist_ok=True)
        for scene in scenes:
            write_generic(scene, out / f"{scene.recording_id}.csv")
            write_scene_meta(scene, out / f"{scene.recording_id}.meta.json")
        print(f"wrote {len(scenes)} scene(s) to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from . import synth

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.spec:
        spec = synth.scenario_from_dict(_load_json(args.spec, "scenario file"))
        scenes = [synth.generate(spec, seed=args.seed)]
    elif args.golden:
        cases = synth.golden_corpus(seed=args.seed)
        scenes = [c.scene for c in cases]
    elif args.corpus:
        scenes = synth.responsive_corpus(args.corpus, seed=args.seed)
    else:
        if args.kind == "cutin":
            spec = synth.cut_in(
                ahead=args.ahead,
                speed=args.speed,
                reaction_delay=args.delay,
                lead_gap=args.lead_gap,
            )
        elif args.kind == "carfollowing":
            spec = synth.car_following(args.gap, args.speed, args.speed - args.dv)
        elif args.kind == "tailgate":
            spec = synth.tailgate(args.headway, args.speed)
        elif args.kind == "overtake":
            spec = synth.merge_behind(speed=args.speed)
        elif args.kind == "empty":
            spec = synth.empty_scene(speed=args.speed)
        else:  # pragma: no cover - argparse restricts choices
            raise TrafficRiskError(f"unknown kind {args.kind}")
        scenes = [synth.generate(spec, seed=args.seed)]
    for scene in scenes:
        write_generic(scene, out / f"{scene.recording_id}.csv")
        write_scene_meta(scene, out / f"{scene.recording_id}.meta.json")
    print(f"wrote {len(scenes)} scene(s) to {out}")
    return EXIT_OK


def _resolve_ae(
    configs: list[str],
    scenes: list[Scene],
    cfg: ModelConfig,
    args,
    outdir: Path,
) -> dict[AeVariant, AeModel]:
    """Load or train the autoencoder(s) needed by the requested configs."""
    needed = {
        SSM_CONFIGS[c[1]].ae_variant for c in configs if SSM_CONFIGS[c[1]].uses_ae
    }
    models: dict[AeVariant, AeModel] = {}
    for variant in sorted(needed, key=lambda v: v.value):
        flag = args.ae_linear if variant is AeVariant.LINEAR else args.ae_tanh
        if flag:
            models[variant] = load_model(flag)
        else:
            models[variant] = train_corpus_ae(scenes, variant, cfg)
            path = outdir / f"ae_{variant.value.lower()}.bin"
            save_model(models[variant], path)
            print(f"trained {variant.value} autoencoder -> {path}")
    return models


def _base_config(args) -> ModelConfig:
    """Run-config file supplies defaults; command-line flags override it."""
    if getattr(args, "model_config", None):
        try:
            return ModelConfig.from_file(args.model_config)
        except ValueError as e:
            raise TrafficRiskError(f"bad run-config: {e}") from None
    return ModelConfig()


def _parse_model_ids(raw: str) -> list[str]:
    configs = [c.strip().lower() for c in raw.split(",") if c.strip()]
    try:
        for c in configs:
            parse_model_id(c)
    except ValueError as e:
        raise TrafficRiskError(str(e)) from None
    return configs


def cmd_risk(args) -> int:
    ids = _parse_model_ids(args.config)
    if len(ids) != 1:
        raise TrafficRiskError("risk takes exactly one --config id")
    config_id = ids[0]
    cfg = _base_config(args).with_model(config_id)
    pos_w, ssm_w = parse_model_id(config_id)
    scenes = _load_scenes(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if not ssm_w.evaluates_parallel:
        print(
            f"warning: config {ssm_w.config_id} carries no PET weight and "
            "cannot evaluate parallel vehicles; they are skipped",
            file=sys.stderr,
        )
    models = _resolve_ae([config_id], scenes, cfg, args, outdir)
    ae = models.get(ssm_w.ae_variant) if ssm_w.uses_ae else None
    n_written = 0
    from .stats import ego_candidates
    from .errors import TrackTooShort

    for scene in scenes:
        for vid in ego_candidates(scene):
            try:
                series = risk_timeseries(scene, vid, ssm_w, pos_w, ae=ae, cfg=cfg)
            except TrackTooShort as e:
                print(f"warning: skipping ego {vid}: {e}", file=sys.stderr)
                continue
            path = outdir / f"risk_{scene.recording_id}_{vid}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["frame", "overall", "r_lv", "r_fv", "r_pl", "r_pf"])
                for i in range(series.n_frames):
                    writer.writerow(
                        [series.start_frame + i, _fmt(series.overall[i])]
                        + [_fmt(series.components[k, i]) for k in range(4)]
                    )
            n_written += 1
    if n_written == 0:
        print("no risk series produced", file=sys.stderr)
        return EXIT_EMPTY
    print(f"wrote {n_written} risk series to {outdir}")
    return EXIT_OK


def _write_results_csv(path: Path, rows: list[tuple[str, CorrelationResult]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "config",
                "scene",
                "ego_id",
                "n",
                "lag_frames",
                "lag_seconds",
                "rho",
                "p_value",
                "significant",
                "note",
            ]
        )
        for config_id, r in rows:
            writer.writerow(
                [
                    config_id,
                    r.scene_id,
                    r.ego_id,
                    r.n,
                    r.lag_frames,
                    _fmt(r.lag_seconds),
                    _fmt(r.rho),
                    _fmt(r.p_value),
                    int(r.significant),
                    r.note,
                ]
            )


def cmd_eval(args) -> int:
    cfg = _base_config(args)
    configs = _parse_model_ids(args.configs)
    if not configs:
        raise TrafficRiskError("--configs must list at least one model id")
    scenes = _load_scenes(args)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    models = _resolve_ae(configs, scenes, cfg, args, outdir)

    all_rows: list[tuple[str, CorrelationResult]] = []
    summaries = {}
    for config_id in configs:
        _, ssm_w = parse_model_id(config_id)
        ae = models.get(ssm_w.ae_variant) if ssm_w.uses_ae else None
        results, summary = evaluate_corpus(
            scenes, config_id, cfg=cfg, ae=ae, jobs=args.jobs
        )
        all_rows.extend((config_id, r) for r in results)
        summaries[config_id] = {
            "n_egos": summary.n_egos,
            "n_failed": summary.n_failed,
            "n_significant": summary.n_significant,
            "significant_fraction": summary.significant_fraction,
            "rho_mean": summary.rho_mean,
            "rho_std": summary.rho_std,
        }
        frac = summary.significant_fraction
        mean = "-" if summary.rho_mean is None else f"{summary.rho_mean:.3f}"
        print(
            f"config {config_id}: {summary.n_egos} egos, "
            f"significant fraction {frac:.3f}, mean rho {mean}"
        )

    _write_results_csv(outdir / "results_long.csv", all_rows)
    payload = {"alpha": cfg.alpha, "configs": summaries}
    (outdir / "summary.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote {outdir / 'results_long.csv'} and {outdir / 'summary.json'}")
    return EXIT_OK


def _read_results_csv(path: Path) -> dict[str, list[CorrelationResult]]:
    results: dict[str, list[CorrelationResult]] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                results.setdefault(row["config"], []).append(
                    CorrelationResult(
                        ego_id=int(row["ego_id"]),
                        lag_frames=int(row["lag_frames"]),
                        lag_seconds=float(row["lag_seconds"]),
                        rho=float(row["rho"]),
                        p_value=float(row["p_value"]),
                        n=int(row["n"]),
                        significant=bool(int(row["significant"])),
                        scene_id=row["scene"],
                        note=row["note"],
                    )
                )
    except (KeyError, TypeError, ValueError) as e:
        raise TrafficRiskError(f"bad results file {path}: {e}") from None
    return results


def cmd_compare(args) -> int:
    results = _read_results_csv(Path(args.results))
    if len(results) < 2:
        print("compare needs results for at least 2 configurations", file=sys.stderr)
        return EXIT_INPUT
    ego_sets = {c: {(r.scene_id, r.ego_id) for r in rs} for c, rs in results.items()}
    base = next(iter(ego_sets.values()))
    if any(not (s & base) for s in ego_sets.values()):
        raise MismatchedCorpora("configurations share no egos")
    cells = compare_configs(results, alpha=args.alpha)
    by_pair = {(c.row, c.col): c for c in cells}
    configs = list(results)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    def _write(path: Path, value):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([""] + configs)
            for row_id in configs:
                row = [row_id]
                for col_id in configs:
                    row.append("-" if row_id == col_id else value(by_pair[(row_id, col_id)]))
                writer.writerow(row)

    _write(outdir / "comparison_matrix.csv", lambda c: c.verdict)
    _write(
        outdir / "comparison_pvalues.csv",
        lambda c: "" if np.isnan(c.p_value) else _fmt(c.p_value),
    )
    print(f"wrote comparison matrix for {len(configs)} configs to {outdir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trafficrisk",
        description="Multi-vehicle traffic safety risk estimation from trajectories",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("ingest", help="parse inputs and print a summary")
    _add_scene_args(p)
    p.add_argument("--write-generic", help="directory for normalized generic CSVs")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate synthetic scenes")
    p.add_argument(
        "--kind",
        choices=["cutin", "carfollowing", "tailgate", "overtake", "empty"],
        default="cutin",
    )
    p.add_argument("--spec", help="declarative scenario JSON replacing --kind")
    p.add_argument("--golden", action="store_true", help="emit the oracle battery")
    p.add_argument("--corpus", type=int, help="emit N scripted-reaction scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delay", type=float, default=0.25, help="reaction delay (s)")
    p.add_argument("--speed", type=float, default=30.0)
    p.add_argument("--gap", type=float, default=50.0)
    p.add_argument("--dv", type=float, default=5.0)
    p.add_argument("--headway", type=float, default=0.3)
    p.add_argument("--ahead", type=float, default=15.0)
    p.add_argument("--lead-gap", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("risk", help="write per-ego risk series CSVs")
    _add_scene_args(p)
    p.add_argument("--config", required=True, help="model id, e.g. 2a")
    p.add_argument("--model-config", help="run-config JSON; flags override it")
    p.add_argument("--ae-linear", help="pretrained linear-variant model file")
    p.add_argument("--ae-tanh", help="pretrained squashed-variant model file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("eval", help="correlation study across a corpus")
    _add_scene_args(p)
    p.add_argument(
        "--configs", required=True, help="comma-separated model ids, e.g. 1a,2a,3g"
    )
    p.add_argument("--model-config", help="run-config JSON; flags override it")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--ae-linear", help="pretrained linear-variant model file")
    p.add_argument("--ae-tanh", help="pretrained squashed-variant model file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="pairwise configuration comparison matrix")
    p.add_argument("--results", required=True, help="results_long.csv from eval")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoEgoCandidates as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_EMPTY
    except (TrafficRiskError, FileNotFoundError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
