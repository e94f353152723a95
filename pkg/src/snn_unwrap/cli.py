"""Batch command line: gen, encode, train, unwrap, eval, report.

Every command writes into ``<out>/<command>_<hash>`` where the hash covers
the resolved configuration and the content of the inputs, so reruns land in
the same directory and produce the same bytes.  Outputs are staged in a
temporary directory and moved into place only when the command succeeds.

Exit codes: 0 success, 2 configuration error, 3 domain error (for example
residues under the path-following engine), 4 input/output error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .encoding import dump_spikes_csv, encode_scene
from .energy import (
    GpuBaseline,
    efficiency_report,
    gpu_energy,
    measure_baseline,
    network_complexity,
    snn_energy,
)
from .errors import (
    CapacityError,
    ConfigError,
    FormatError,
    InvalidDataset,
    InvalidRaster,
    NumericalError,
    OracleInapplicable,
    SnnUnwrapError,
)
from .lif import activity_stats
from .network import build_network, decision_histogram, infer, load_snapshot, save_snapshot
from .plasticity import TrainingTrace, train
from .raster_io import (
    TWO_PI,
    RasterKind,
    WrapCountRaster,
    detect_residues,
    evaluate,
    export_pgm,
    itoh_unwrap,
    read_raster,
    reconstruct,
    single_fringe_ramp_specs,
    synthesize_scene,
    write_raster,
)

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_IO = 0, 2, 3, 4
SCHEMA_VERSION = "1"
SCENE_FILES = ("absolute", "wrapped", "coherence", "k_truth")


class MissingArtifacts(OSError):
    def __init__(self, missing):
        self.missing = [str(m) for m in missing]
        super().__init__("missing artifacts:\n" + "\n".join(f"  {m}" for m in self.missing))


# ---------------------------------------------------------------------------
# helpers


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    files = sorted(p for p in path.rglob("*") if p.is_file()) if path.is_dir() else [path]
    for f in files:
        h.update(str(f.relative_to(path) if path.is_dir() else f.name).encode())
        h.update(f.read_bytes())
    return h.hexdigest()


class RunDir:
    """Stage outputs next to the final directory; publish on success only."""

    def __init__(self, out: Path, command: str, digest: str):
        self.final = out / f"{command}_{digest[:12]}"
        self.tmp = out / f".{self.final.name}.partial-{os.getpid()}"

    def __enter__(self) -> Path:
        self.final.parent.mkdir(parents=True, exist_ok=True)
        if self.tmp.exists():
            shutil.rmtree(self.tmp)
        self.tmp.mkdir()
        return self.tmp

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            shutil.rmtree(self.tmp, ignore_errors=True)
            return False
        if self.final.exists():
            shutil.rmtree(self.final)
        os.replace(self.tmp, self.final)
        return False


def _require(paths) -> None:
    missing = [p for p in paths if not Path(p).exists()]
    if missing:
        raise MissingArtifacts(missing)


def load_scene_dir(path: Path, need_truth: bool = False) -> dict:
    """Rasters of one scene directory; ``absolute`` and ``k_truth`` are optional."""
    path = Path(path)
    required = ["wrapped", "coherence"] + (["k_truth"] if need_truth else [])
    _require(path / f"{name}.snur" for name in required)
    scene = {}
    for name in SCENE_FILES:
        f = path / f"{name}.snur"
        scene[name] = read_raster(f) if f.exists() else None
    if scene["wrapped"].kind is not RasterKind.WRAPPED:
        raise InvalidRaster(f"{path / 'wrapped.snur'} is not a wrapped-phase raster")
    if scene["wrapped"].shape != scene["coherence"].shape:
        raise InvalidRaster(f"{path}: wrapped and coherence rasters differ in shape")
    return scene


def scene_dirs(path: Path) -> list[Path]:
    """A scene directory, or every scene listed in a ``gen`` manifest (file or run dir)."""
    path = Path(path)
    manifest = path if path.is_file() else path / "manifest.json"
    if manifest.is_file():
        with open(manifest) as fh:
            entries = json.load(fh).get("scenes", [])
        dirs = [manifest.parent / e["dir"] for e in entries]
        _require(dirs)
        return dirs
    _require([path])
    return [path]


def _write_scene(scene, spec, target: Path) -> None:
    target.mkdir(parents=True)
    for name, raster in zip(SCENE_FILES, scene):
        write_raster(raster, target / f"{name}.snur")
    export_pgm(scene.wrapped, target / "wrapped.pgm")
    export_pgm(scene.absolute, target / "absolute.pgm")
    export_pgm(scene.coherence, target / "coherence.pgm")
    _dump_json(spec.to_dict(), target / "spec.json")


# ---------------------------------------------------------------------------
# commands


def cmd_gen(cfg: cfgmod.RunConfig, out: Path) -> Path:
    ds = cfg.dataset
    if ds["kind"] == "fringe":
        if cfg.scene.width != cfg.scene.height:
            raise ConfigError("fringe datasets need a square scene")
        specs = single_fringe_ramp_specs(
            ds["count"], size=cfg.scene.width, seed=cfg.seed, coherence_level=cfg.scene.coherence_level,
            coherence_profile=cfg.scene.coherence_profile, span=tuple(ds["span"]),
        )
    else:
        specs = [replace(cfg.scene, rng_seed=cfg.seed + i) for i in range(ds["count"])]
    run = RunDir(out, "gen", cfg.digest("gen"))
    with run as tmp:
        entries = []
        for i, spec in enumerate(specs):
            name = f"scene_{i:03d}"
            scene = synthesize_scene(spec)
            _write_scene(scene, spec, tmp / name)
            entries.append({"dir": name, "spec": spec.to_dict()})
        _dump_json({"schema_version": SCHEMA_VERSION, "command": "gen", "config": cfg.raw, "scenes": entries},
                   tmp / "manifest.json")
    return run.final


def cmd_encode(cfg: cfgmod.RunConfig, out: Path, inputs: list[Path]) -> Path:
    scenes = [(d, load_scene_dir(d)) for d in inputs]
    digest = cfg.digest("encode", [_file_digest(d) for d in inputs])
    run = RunDir(out, "encode", digest)
    with run as tmp:
        summary = []
        for d, scene in scenes:
            enc = encode_scene(scene["wrapped"], scene["coherence"], cfg.network.encoder)
            target = tmp / d.name if len(scenes) > 1 else tmp
            target.mkdir(exist_ok=True)
            n = dump_spikes_csv(enc.channels(), target / "spikes.csv")
            info = {
                "scene": d.name,
                "T_sim": enc.T_sim,
                "n_neurons": int(enc.channels().shape[1]),
                "channel_spikes": n,
                "total_spikes_with_population": enc.total_spikes(include_population=True),
                "maps": {name: int(np.asarray(m).sum()) for name, m in zip(
                    ("phase", "gradient_x", "coherence", "gradient_y"), enc.maps())},
            }
            _dump_json(info, target / "encode.json")
            summary.append(info)
        _dump_json({"schema_version": SCHEMA_VERSION, "command": "encode", "config": cfg.raw, "scenes": summary},
                   tmp / "manifest.json")
    return run.final


def _dataset(inputs: list[Path]):
    data = []
    for d in inputs:
        s = load_scene_dir(d, need_truth=True)
        data.append((s["wrapped"], s["coherence"], s["k_truth"]))
    shapes = {w.shape for w, _, _ in data} | {k.shape for _, _, k in data}
    if len(shapes) != 1:
        raise InvalidDataset(f"dataset mixes raster shapes {sorted(shapes)}")
    return data


def cmd_train(cfg: cfgmod.RunConfig, out: Path, inputs: list[Path], resume: Path | None) -> Path:
    data = _dataset(inputs)
    M, N = data[0][0].shape
    trace = TrainingTrace()
    if resume is not None:
        _require([resume])
        topology = load_snapshot(resume)
        prev = Path(resume).parent / "trace.csv"
        if prev.exists():
            trace = TrainingTrace.from_csv(prev)
            trace.records = [r for r in trace.records if r.epoch <= topology.trained_epochs]
    else:
        topology = build_network(M, N, cfg.network, rng_seed=cfg.seed)
    if (topology.height, topology.width) != (M, N):
        raise InvalidDataset(f"dataset is {M}x{N} but the network is {topology.height}x{topology.width}")
    extra = [_file_digest(d) for d in inputs] + [_file_digest(Path(resume)) if resume else None]
    run = RunDir(out, "train", cfg.digest("train", extra))
    with run as tmp:
        save_snapshot(topology, tmp / "checkpoint_initial.snut")
        every = cfg.checkpoint_every

        def on_epoch(top, rec):
            if every and rec.epoch % every == 0:
                save_snapshot(top, tmp / f"checkpoint_epoch_{rec.epoch:03d}.snut")

        topology, trace = train(data, topology, cfg.learn, trace=trace, on_epoch=on_epoch)
        save_snapshot(topology, tmp / "checkpoint.snut")
        trace.to_csv(tmp / "trace.csv")
        _dump_json({
            "schema_version": SCHEMA_VERSION, "command": "train", "config": cfg.raw,
            "scenes": [str(d) for d in inputs], "epochs_completed": topology.trained_epochs,
            "resumed_from": None if resume is None else str(resume),
        }, tmp / "manifest.json")
    return run.final


def _unwrap_one(cfg, scene, topology, target: Path) -> dict:
    wrapped, coherence, truth = scene["wrapped"], scene["coherence"], scene["k_truth"]
    engine = cfg.run["engine"]
    info = {"engine": engine}
    if engine == "itoh":
        absolute = itoh_unwrap(wrapped)
        k = WrapCountRaster(np.rint((absolute.values - wrapped.values) / TWO_PI).astype(np.int64), max_abs_k=None)
    else:
        res = infer(wrapped, coherence, topology, mode=cfg.run["mode"], order=cfg.run["order"])
        k = res.k
        absolute = reconstruct(wrapped, k)
        res.trace.to_jsonl(target / "trace.jsonl")
        n_neurons = sum(topology.layer_sizes)
        T = res.record.T_sim
        e_snn = snn_energy(res.record, n_neurons, T, cfg.hardware)
        if cfg.t_process is None:
            baseline = measure_baseline(itoh_unwrap, wrapped, (0, 0), "row_first", False, p_gpu=cfg.p_gpu)
        else:
            baseline = GpuBaseline(cfg.p_gpu, cfg.t_process, label="configured")
        complexity = network_complexity(res, topology, coherence)
        report = efficiency_report(e_snn, gpu_energy(baseline), complexity, cfg.hardware, baseline)
        energy = report.to_dict()
        energy["n_spikes"] = res.record.total_with_sources
        energy["n_neurons"] = n_neurons
        energy["T"] = T
        _dump_json(energy, target / "energy.json")
        (target / "energy.txt").write_text(report.to_text() + "\n")
        stats = {"decisions": decision_histogram(res.trace, topology.params.decision.k_values),
                 "activity": activity_stats(res.record), "mode": cfg.run["mode"],
                 "untrained": res.trace.untrained}
        _dump_json(stats, target / "stats.json")
        info["stats"] = stats
    write_raster(k, target / "k.snur")
    write_raster(absolute, target / "absolute.snur")
    export_pgm(absolute, target / "absolute.pgm")
    if truth is not None:
        offset = 0
        if engine == "itoh":
            # the path-following result is defined up to a global 2*pi multiple
            diff = (k.values - truth.values).ravel()
            vals, counts = np.unique(diff, return_counts=True)
            offset = int(vals[np.argmax(counts)])
            k = WrapCountRaster(k.values - offset, max_abs_k=None)
        metrics = evaluate(k, truth, coherence, cfg.run["mask_threshold"]).to_dict()
        metrics["global_offset_removed"] = offset
        _dump_json(metrics, target / "metrics.json")
        info["metrics"] = metrics
    return info


def cmd_unwrap(cfg: cfgmod.RunConfig, out: Path, inputs: list[Path], checkpoint: Path | None) -> Path:
    scenes = [(d, load_scene_dir(d)) for d in inputs]
    if cfg.run["engine"] == "itoh":
        for d, s in scenes:
            residues = detect_residues(s["wrapped"])
            if residues:
                raise OracleInapplicable(residues)
    topology = None
    if cfg.run["engine"] == "snn":
        if checkpoint is not None:
            _require([checkpoint])
            topology = load_snapshot(checkpoint)
        else:
            M, N = scenes[0][1]["wrapped"].shape
            topology = build_network(M, N, cfg.network, rng_seed=cfg.seed)
    extra = [_file_digest(d) for d in inputs] + [_file_digest(Path(checkpoint)) if checkpoint else None]
    run = RunDir(out, "unwrap", cfg.digest("unwrap", extra))
    with run as tmp:
        summary = []
        for d, scene in scenes:
            target = tmp / d.name if len(scenes) > 1 else tmp
            target.mkdir(exist_ok=True)
            info = _unwrap_one(cfg, scene, topology, target)
            info["scene"] = str(d)
            summary.append(info)
        _dump_json({"schema_version": SCHEMA_VERSION, "command": "unwrap", "config": cfg.raw,
                    "checkpoint": None if checkpoint is None else str(checkpoint), "scenes": summary},
                   tmp / "manifest.json")
    return run.final


def cmd_eval(cfg: cfgmod.RunConfig, out: Path, pred: Path, scene: Path) -> Path:
    _require([pred])
    s = load_scene_dir(scene, need_truth=True)
    k = read_raster(pred)
    if not isinstance(k, WrapCountRaster):
        raise InvalidRaster(f"{pred} is not a wrap-count raster")
    metrics = evaluate(k, s["k_truth"], s["coherence"], cfg.run["mask_threshold"])
    run = RunDir(out, "eval", cfg.digest("eval", _file_digest(pred), _file_digest(Path(scene))))
    with run as tmp:
        d = metrics.to_dict()
        d["schema_version"] = SCHEMA_VERSION
        _dump_json(d, tmp / "metrics.json")
    return run.final


def _report_text(report: dict) -> str:
    lines = [f"schema_version {report['schema_version']}"]
    for entry in report["runs"]:
        lines.append(f"[{entry['scene']}]")
        for section in ("metrics", "energy"):
            data = entry.get(section)
            if data is None:
                continue
            for key in sorted(data):
                value = data[key]
                if isinstance(value, dict):
                    for sub in sorted(value):
                        lines.append(f"  {section}.{key}.{sub} = {json.dumps(value[sub], sort_keys=True)}")
                else:
                    lines.append(f"  {section}.{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: cfgmod.RunConfig, out: Path, runs: list[Path]) -> Path:
    missing = []
    entries = []
    for run_dir in runs:
        run_dir = Path(run_dir)
        manifest = run_dir / "manifest.json"
        if not manifest.exists():
            missing.append(manifest)
            continue
        with open(manifest) as fh:
            scenes = json.load(fh).get("scenes", [])
        targets = [run_dir / Path(s["scene"]).name for s in scenes] if len(scenes) > 1 else [run_dir]
        for s, target in zip(scenes, targets):
            entry = {"scene": s.get("scene", str(run_dir)), "run": str(run_dir)}
            wanted = ["metrics"] + (["energy"] if s.get("engine") == "snn" else [])
            for name in wanted:
                f = target / f"{name}.json"
                if f.exists():
                    with open(f) as fh:
                        entry[name] = json.load(fh)
                else:
                    missing.append(f)
            entries.append(entry)
    if missing:
        raise MissingArtifacts(missing)
    report = {"schema_version": SCHEMA_VERSION, "runs": entries}
    run = RunDir(out, "report", cfg.digest("report", [_file_digest(Path(r)) for r in runs]))
    with run as tmp:
        _dump_json(report, tmp / "report.json")
        (tmp / "report.txt").write_text(_report_text(report))
    return run.final


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    epilog = "configuration keys (TOML) and their defaults:\n" + cfgmod.describe_defaults()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file overriding the defaults listed below")
    common.add_argument("--seed", type=int, help="global RNG seed, the only source of randomness (default 0)")
    common.add_argument("--out", type=Path, default=Path("runs"), help="parent of the run directory (default: runs)")
    common.add_argument("--engine", choices=("snn", "itoh"), help="unwrapping engine (default snn)")
    common.add_argument("--mode", choices=("one_shot", "propagating"), help="network readout mode (default one_shot)")

    p = argparse.ArgumentParser(prog="snn-unwrap", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=epilog)
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    g = sub.add_parser("gen", parents=[common], help="synthesise scenes", epilog=epilog, formatter_class=fmt)
    g.add_argument("--shape", help="bump, ramp, bumps (default bump)")
    g.add_argument("--size", type=int, help="square scene side in pixels (default 64)")
    g.add_argument("--amplitude", type=float, help="bump amplitude in radians (default 10)")
    g.add_argument("--slope", type=float, help="ramp slope in radians per pixel (default 0)")
    g.add_argument("--coherence", type=float, help="coherence level in [0, 1] (default 1)")
    g.add_argument("--profile", help="uniform, radial, patchy (default uniform)")
    g.add_argument("--count", type=int, help="number of scenes (default 1)")
    g.add_argument("--fringe", action="store_true", help="descending single-fringe ramps (training data)")

    e = sub.add_parser("encode", parents=[common], help="spike-encode scenes", epilog=epilog, formatter_class=fmt)
    e.add_argument("--input", type=Path, required=True, help="scene directory or gen run/manifest")

    t = sub.add_parser("train", parents=[common], help="train the network", epilog=epilog, formatter_class=fmt)
    t.add_argument("--dataset", type=Path, required=True, help="gen run directory or manifest")
    t.add_argument("--epochs", type=int, help="total epochs to reach (default 50)")
    t.add_argument("--resume", type=Path, help="checkpoint to continue from")
    t.add_argument("--checkpoint-every", type=int, help="snapshot period in epochs, 0 disables (default 10)")

    u = sub.add_parser("unwrap", parents=[common], help="unwrap scenes", epilog=epilog, formatter_class=fmt)
    u.add_argument("--input", type=Path, required=True, help="scene directory or gen run/manifest")
    u.add_argument("--checkpoint", type=Path, help="trained network snapshot (default: untrained network)")
    u.add_argument("--order", choices=("raster", "coherence"), help="propagating traversal order (default raster)")

    v = sub.add_parser("eval", parents=[common], help="score a wrap-count raster", epilog=epilog, formatter_class=fmt)
    v.add_argument("--pred", type=Path, required=True, help="predicted wrap-count SNUR file")
    v.add_argument("--input", type=Path, required=True, help="scene directory holding k_truth and coherence")
    v.add_argument("--mask-threshold", type=float, help="coherence mask threshold (default 0.3)")

    r = sub.add_parser("report", parents=[common], help="merge unwrap runs", epilog=epilog, formatter_class=fmt)
    r.add_argument("runs", type=Path, nargs="+", help="unwrap run directories")
    return p


def _overrides(args) -> list[tuple[str, object]]:
    flags = [
        ("seed", "seed"), ("engine", "run.engine"), ("mode", "run.mode"), ("order", "run.order"),
        ("mask_threshold", "run.mask_threshold"), ("shape", "scene.shape"), ("amplitude", "scene.amplitude"),
        ("slope", "scene.ramp_slope"), ("coherence", "scene.coherence_level"), ("profile", "scene.coherence_profile"),
        ("count", "dataset.count"), ("epochs", "learn.epochs"), ("checkpoint_every", "learn.checkpoint_every"),
    ]
    out = [(key, getattr(args, attr)) for attr, key in flags if getattr(args, attr, None) is not None]
    if getattr(args, "size", None) is not None:
        out += [("scene.width", args.size), ("scene.height", args.size)]
    if getattr(args, "fringe", False):
        out.append(("dataset.kind", "fringe"))
    return out


def resolve_config(args) -> cfgmod.RunConfig:
    raw = cfgmod.default_config()
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config file {args.config} does not exist")
        raw = cfgmod.merge(raw, cfgmod.load_toml(args.config))
    for key, value in _overrides(args):
        cfgmod.set_path(raw, key, value)
    return cfgmod.build(raw)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        out = args.out
        if args.command == "gen":
            run = cmd_gen(cfg, out)
        elif args.command == "encode":
            run = cmd_encode(cfg, out, scene_dirs(args.input))
        elif args.command == "train":
            run = cmd_train(cfg, out, scene_dirs(args.dataset), args.resume)
        elif args.command == "unwrap":
            run = cmd_unwrap(cfg, out, scene_dirs(args.input), args.checkpoint)
        elif args.command == "eval":
            run = cmd_eval(cfg, out, args.pred, args.input)
        else:
            run = cmd_report(cfg, out, args.runs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleInapplicable as exc:
        print(f"domain error: {len(exc.residues)} residues; path-following unwrapping is not applicable",
              file=sys.stderr)
        return EXIT_DOMAIN
    except (InvalidDataset, InvalidRaster, CapacityError, NumericalError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SnnUnwrapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(run)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
