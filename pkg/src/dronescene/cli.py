"""Command-line surface.

Subcommands: gen-smear, analyze-smear, gen-scene, run-mission, entry-sim,
evaluate. Every seeded command is bit-reproducible; each run writes a
manifest (command, resolved config, seed, version, relative output paths)
next to its outputs.

Exit codes: 0 success, 1 usage error, 2 data error, 3 mission failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__, dataset, mapping, mission, smear
from .raster import Raster, RasterIOError, generate_smear, read_image, write_image

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_MISSION = 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_schema(name: str) -> dict:
    with resources.files("dronescene").joinpath(f"schemas/{name}").open() as fh:
        return json.load(fh)


def _write_json(doc: dict, path: Path, schema: str | None = None) -> None:
    if schema is not None:
        jsonschema.validate(doc, _load_schema(schema))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_manifest(command: str, config: dict, seed, outputs: list,
                    path: Path) -> None:
    doc = {"command": command, "config": config, "seed": seed,
           "version": __version__,
           "outputs": [Path(o).name for o in outputs]}
    _write_json(doc, path, "manifest.schema.json")


def _load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed config {path}: {exc}") from exc


def _resolve(flag_value, config: dict, key: str, default):
    """Explicit flag beats config file beats default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


# ---------------------------------------------------------------------------
# gen-smear
# ---------------------------------------------------------------------------

def _cmd_gen_smear(args) -> int:
    if args.batch is not None:
        return _gen_smear_batch(args)
    cfg = _load_config_file(args.spec_file) if args.spec_file else {}
    try:
        spec = dataset.centered_stroke(
            direction_deg=_resolve(args.direction, cfg, "direction_deg", 0.0) % 360.0,
            length=_resolve(args.length, cfg, "length", 140.0),
            stamp=_resolve(args.stamp, cfg, "stamp", "shoe"),
            stamp_size=_resolve(args.size, cfg, "stamp_size", 26.0),
            continuity=_resolve(args.continuity, cfg, "continuity", "staccato"),
            depletion=_resolve(args.depletion, cfg, "depletion", 0.35),
            interval=_resolve(args.interval, cfg, "interval", 0.0),
            seed=_resolve(args.seed, cfg, "seed", 0),
            width=args.width, height=args.height)
        if "start" in cfg or (args.start_x is not None and args.start_y is not None):
            start = (cfg.get("start") if "start" in cfg
                     else [args.start_x, args.start_y])
            spec = dataset.spec_from_dict({**dataset.spec_to_dict(spec),
                                           "start": start})
        raster, truth_deg, truth_label = dataset.generate_sample(
            spec, args.width, args.height)
    except ValueError as exc:
        raise UsageError(f"invalid stroke spec: {exc}") from exc

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    image_path = out if out.suffix == ".ppm" else out.with_suffix(".ppm")
    write_image(raster, image_path)
    sidecar = {"truth_deg": truth_deg, "truth_label": truth_label,
               "spec": dataset.spec_to_dict(spec)}
    sidecar_path = image_path.with_suffix(".json")
    _write_json(sidecar, sidecar_path, "sidecar.schema.json")
    _write_manifest("gen-smear", sidecar, spec.seed,
                    [image_path, sidecar_path],
                    image_path.with_suffix(".manifest.json"))
    print(f"wrote {image_path} (truth {truth_deg:.1f} deg, {truth_label})")
    return EXIT_OK


def _gen_smear_batch(args) -> int:
    out_dir = Path(args.batch)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    entries = []
    outputs = []
    for i, spec in enumerate(dataset.standard_composition(seed, args.width,
                                                          args.height)):
        raster, truth_deg, truth_label = dataset.generate_sample(
            spec, args.width, args.height)
        image_path = out_dir / f"sample_{i:02d}.ppm"
        write_image(raster, image_path)
        sidecar = {"truth_deg": truth_deg, "truth_label": truth_label,
                   "spec": dataset.spec_to_dict(spec)}
        _write_json(sidecar, image_path.with_suffix(".json"),
                    "sidecar.schema.json")
        entries.append({"image": image_path.name, "truth_deg": truth_deg,
                        "truth_label": truth_label})
        outputs += [image_path, image_path.with_suffix(".json")]
    manifest_doc = {"samples": entries}
    _write_json(manifest_doc, out_dir / "dataset.json")
    _write_manifest("gen-smear", {"batch": True, "n": len(entries)}, seed,
                    outputs + [out_dir / "dataset.json"],
                    out_dir / "run_manifest.json")
    print(f"wrote {len(entries)} samples to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze-smear / evaluate
# ---------------------------------------------------------------------------

def _collect_images(paths) -> list:
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files += sorted(p.rglob("*.ppm"))
        else:
            files.append(p)
    return sorted(set(files))


def _analyze_files(files, ranges) -> tuple:
    """Per-file result entries plus (estimate, truth) pairs when sidecars
    carry ground truth."""
    results = []
    scored = []
    failures = 0
    for path in files:
        entry = {"image": str(path)}
        try:
            raster = read_image(path)
            est = smear.analyze_raster(raster, ranges)
            entry.update({"angle_deg": est.angle_deg, "label": est.label,
                          "ambiguous": est.ambiguous,
                          "offset_magnitude_px": est.offset_magnitude})
        except (RasterIOError, OSError, smear.NoBloodDetectedError,
                smear.InsufficientExtentError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            est = None
            failures += 1
        results.append(entry)
        sidecar = Path(path).with_suffix(".json")
        if sidecar.exists():
            try:
                truth = json.loads(sidecar.read_text())
                scored.append((est, truth["truth_deg"], truth["truth_label"]))
            except (json.JSONDecodeError, KeyError):
                pass
    return results, scored, failures


def _cmd_analyze_smear(args) -> int:
    files = _collect_images(args.paths)
    if not files:
        raise DataError("no images found")
    ranges = smear.HueRangeSet(min_saturation=args.min_saturation,
                               min_value=args.min_value)
    results, scored, failures = _analyze_files(files, ranges)
    doc = {"results": results}
    if scored:
        report = smear.summarize_predictions(scored)
        doc["dataset"] = report.to_dict()
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        jsonschema.validate(doc, _load_schema("smear_report.schema.json"))
        Path(args.out).write_text(text)
        _write_manifest("analyze-smear", {"n_images": len(files)}, None,
                        [args.out], Path(args.out).with_suffix(".manifest.json"))
    else:
        sys.stdout.write(text)
    if failures == len(files):
        raise DataError("all images failed to analyze")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    doc = _load_config_file(args.manifest)
    base = Path(args.manifest).parent
    try:
        samples = [(base / s["image"], s["truth_deg"], s["truth_label"])
                   for s in doc["samples"]]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed dataset manifest: {exc}") from exc
    if not samples:
        raise DataError("dataset manifest lists no samples")
    scored = []
    results = []
    for path, truth_deg, truth_label in samples:
        entry = {"image": str(path)}
        try:
            est = smear.analyze_raster(read_image(path))
            entry.update({"angle_deg": est.angle_deg, "label": est.label,
                          "ambiguous": est.ambiguous})
        except (RasterIOError, OSError, smear.NoBloodDetectedError,
                smear.InsufficientExtentError) as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            est = None
        results.append(entry)
        scored.append((est, truth_deg, truth_label))
    report = smear.summarize_predictions(scored)
    out_doc = {"results": results, "dataset": report.to_dict()}
    text = json.dumps(out_doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gen-scene / run-mission
# ---------------------------------------------------------------------------

def _cmd_gen_scene(args) -> int:
    if args.random:
        scene = mission.random_scene(args.seed or 0, size_m=args.size,
                                     n_items=args.items)
    else:
        scene = mission.demo_scene()
    doc = mission.scene_to_dict(scene)
    _write_json(doc, Path(args.out), "scene.schema.json")
    _write_manifest("gen-scene", doc, args.seed, [args.out],
                    Path(args.out).with_suffix(".manifest.json"))
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_run_mission(args) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    seed = _resolve(args.seed, cfg, "seed", 0)
    out_dir = Path(_resolve(args.out_dir, cfg, "out_dir", "mission_out"))
    out_dir.mkdir(parents=True, exist_ok=True)

    scene_ref = cfg.get("scene", "demo")
    if scene_ref == "demo":
        scene = mission.demo_scene()
    else:
        scene_path = Path(scene_ref)
        if not scene_path.is_absolute() and args.config:
            scene_path = Path(args.config).parent / scene_path
        try:
            scene = mission.load_scene(scene_path)
        except (OSError, json.JSONDecodeError, KeyError) as exc:
            raise DataError(f"cannot load scene {scene_ref}: {exc}") from exc

    noise = mission.NoiseModel(**cfg.get("noise", {}))
    detector = mission.DetectorModel(**cfg.get("detector", {}), seed=seed)
    servo = mission.ServoConfig(**cfg.get("servo", {}))
    flight = mission.FlightConfig(**cfg.get("flight", {}))

    scene_map, map_log = mission.run_mapping_pass(scene, noise, seed, flight)
    result = mission.run_evidence_pass(scene_map, scene, detector, servo,
                                       seed + 1, flight)

    report_doc = result.report.to_dict()
    report_doc["advisory"] = mission.DOWNWASH_ADVISORY
    if result.truth_report is not None:
        mean, sd = mapping.discrepancy_stats(result.matched_report,
                                             result.truth_report)
        report_doc["mean_discrepancy_m"] = mean
        report_doc["sd_discrepancy_m"] = sd

    _write_json(mapping.map_to_dict(scene_map), out_dir / "map.json",
                "map.schema.json")
    _write_json(report_doc, out_dir / "distances.json",
                "distance_report.schema.json")
    (out_dir / "distances.txt").write_text(result.report.to_table() + "\n")

    # Single two-pass log: evidence events follow the mapping pass in time.
    offset = map_log.total_time_s + 1.0
    lines = []
    for line in map_log.to_jsonl().splitlines():
        rec = json.loads(line)
        rec["pass"] = "mapping"
        lines.append(json.dumps(rec, sort_keys=True))
    for line in result.log.to_jsonl().splitlines():
        rec = json.loads(line)
        rec["t"] = round(rec["t"] + offset, 9)
        rec["pass"] = "evidence"
        lines.append(json.dumps(rec, sort_keys=True))
    (out_dir / "mission_log.jsonl").write_text("\n".join(lines) + "\n")

    resolved = {"scene": scene_ref, "noise": vars(noise).copy(),
                "detector": {k: v for k, v in vars(detector).items()},
                "servo": vars(servo).copy(),
                "flight": vars(flight).copy()}
    _write_manifest("run-mission", resolved, seed,
                    ["map.json", "distances.json", "distances.txt",
                     "mission_log.jsonl"],
                    out_dir / "run_manifest.json")
    print(f"mapped {len(scene_map.markers)} markers, recorded "
          f"{len(scene_map.evidence)} evidence items, "
          f"{len(result.report.pairs)} pairwise distances -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry-sim
# ---------------------------------------------------------------------------

def _cmd_entry_sim(args) -> int:
    cfg = _load_config_file(args.config) if args.config else {}
    try:
        model = mission.EntryModel(
            drone_mass_kg=_resolve(args.mass, cfg, "drone_mass_kg",
                                   mission.EntryModel.drone_mass_kg),
            accel_m_s2=_resolve(args.accel, cfg, "accel_m_s2",
                                mission.EntryModel.accel_m_s2),
            window_width_m=_resolve(args.window_width, cfg, "window_width_m",
                                    mission.EntryModel.window_width_m),
            required_force_N=_resolve(args.required_force, cfg,
                                      "required_force_N",
                                      mission.EntryModel.required_force_N),
            aim_noise_sigma_m=_resolve(args.aim_noise, cfg, "aim_noise_sigma_m",
                                       mission.EntryModel.aim_noise_sigma_m),
            knockaway_prob_per_cm_offset=_resolve(
                args.knockaway_per_cm, cfg, "knockaway_prob_per_cm_offset",
                mission.EntryModel.knockaway_prob_per_cm_offset))
    except ValueError as exc:
        raise UsageError(f"invalid entry model: {exc}") from exc

    feas = mission.entry_feasibility(model)
    doc = {"feasibility": feas.to_dict()}
    summary = None
    if args.trials:
        summary = mission.simulate_entry_trials(model, args.trials,
                                                args.seed or 0)
        doc["trials"] = summary.to_dict()

    print(f"thrust: {feas.thrust_N:.2f} N")
    print(f"required torque: {feas.required_torque_Nm:.2f} N*m "
          f"(force {model.required_force_N:.2f} N at the far edge)")
    print(f"feasible: {'yes' if feas.feasible else 'no'}")
    if summary is not None:
        print(f"success rate: {summary.success_rate:.3f} "
              f"({summary.successes}/{summary.n_trials})")
        print(f"failures: insufficient-torque {summary.insufficient_torque}, "
              f"knocked-away {summary.knocked_away}")
    if args.out:
        _write_json(doc, Path(args.out), "entry_summary.schema.json")
        _write_manifest("entry-sim", {k: v for k, v in vars(model).items()},
                        args.seed, [args.out],
                        Path(args.out).with_suffix(".manifest.json"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="dronescene",
                     description="Desk-scale crime-scene drone toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-smear", help="generate a synthetic transfer stain")
    p.add_argument("--out", default="smear.ppm")
    p.add_argument("--batch", metavar="DIR",
                   help="write the standard 20-sample dataset to DIR")
    p.add_argument("--spec-file", help="JSON stroke spec; explicit flags win")
    p.add_argument("--stamp", choices=["hand", "shoe", "blob"])
    p.add_argument("--continuity", choices=["legato", "staccato"])
    p.add_argument("--direction", type=float, help="motion direction, degrees")
    p.add_argument("--length", type=float)
    p.add_argument("--size", type=float, help="stamp size, px")
    p.add_argument("--interval", type=float, help="staccato interval, px")
    p.add_argument("--depletion", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int, default=dataset.DEFAULT_WIDTH)
    p.add_argument("--height", type=int, default=dataset.DEFAULT_HEIGHT)
    p.add_argument("--start-x", type=float)
    p.add_argument("--start-y", type=float)
    p.set_defaults(func=_cmd_gen_smear)

    p = sub.add_parser("analyze-smear", help="run the direction pipeline")
    p.add_argument("paths", nargs="+")
    p.add_argument("--out", help="report JSON path (default: stdout)")
    p.add_argument("--min-saturation", type=float, default=0.45)
    p.add_argument("--min-value", type=float, default=0.25)
    p.set_defaults(func=_cmd_analyze_smear)

    p = sub.add_parser("evaluate", help="score a dataset manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("gen-scene", help="write a scene ground-truth file")
    p.add_argument("--out", default="scene.json")
    p.add_argument("--random", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=float, default=2.0)
    p.add_argument("--items", type=int, default=3)
    p.set_defaults(func=_cmd_gen_scene)

    p = sub.add_parser("run-mission", help="simulate the two-pass mission")
    p.add_argument("--config", help="mission config JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir")
    p.set_defaults(func=_cmd_run_mission)

    p = sub.add_parser("entry-sim", help="window entry feasibility and trials")
    p.add_argument("--config")
    p.add_argument("--mass", type=float, help="kg")
    p.add_argument("--accel", type=float, help="m/s^2")
    p.add_argument("--window-width", type=float, help="m")
    p.add_argument("--required-force", type=float, help="N at the far edge")
    p.add_argument("--aim-noise", type=float, help="contact scatter sigma, m")
    p.add_argument("--knockaway-per-cm", type=float)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="summary JSON path")
    p.set_defaults(func=_cmd_entry_sim)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, RasterIOError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except mission.MappingFailedError as exc:
        print(f"mission failed: {exc}", file=sys.stderr)
        return EXIT_MISSION


if __name__ == "__main__":
    sys.exit(main())
