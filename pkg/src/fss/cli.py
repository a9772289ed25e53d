"""Command-line pipeline: fixtures, sampling, training, extraction,
evaluation, and the scheme-ablation experiment.

Exit codes: 0 success, 2 configuration/validation error, 3 numeric
failure. Every command drops a materialized ``config_echo.json`` next to
its outputs so runs are reproducible from their artifacts alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fixtures_mod
from .bvh import Bvh
from .config import RunConfig, load_run_config
from .errors import ConfigError, FssError, NumericError
from .experiment import run_experiment
from .extract import marching_cubes, sample_dense_grid
from .field import build_model, history_to_csv, load_checkpoint, save_checkpoint, train
from .mesh import NormalizeTransform, load_mesh, normalize_to_camera_space, save_obj
from .metrics import evaluate
from .schemes import generate_scheme, load_sample_set, save_sample_set
from .thickness import exact_thickness_plane


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> RunConfig:
    cfg = load_run_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg.train.seed = args.seed
    return cfg


def _echo(cfg: RunConfig, out: Path) -> None:
    cfg.echo(out / "config_echo.json")


def _prepare_mesh(cfg: RunConfig, mesh_path: str):
    mesh = load_mesh(mesh_path)
    transform = NormalizeTransform.identity()
    if cfg.mesh.normalize:
        mesh, transform = normalize_to_camera_space(mesh)
    return mesh, transform


def cmd_fixtures(args) -> int:
    out = _out_dir(args)
    written = fixtures_mod.write_fixture_set(out)
    print(f"wrote {len(written)} files to {out}")
    return 0


def cmd_sample(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    mesh, _ = _prepare_mesh(cfg, args.mesh)
    bvh = Bvh(mesh)
    seed = args.seed if args.seed is not None else cfg.train.seed
    region_weights = None
    weights_path = args.region_weights or cfg.mesh.region_weights
    if weights_path:
        region_weights = fixtures_mod.load_region_weights(weights_path, len(mesh.faces))
    sample_set = generate_scheme(args.scheme, mesh, bvh, cfg.scheme, seed,
                                 region_weights=region_weights)
    sample_set.mesh_id = Path(args.mesh).stem

    stem = f"{args.scheme}_{sample_set.mesh_id}_seed{seed}"
    save_sample_set(sample_set, out / f"{stem}.fss1")
    summary = sample_set.summary()
    (out / f"{stem}.summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _echo(cfg, out)
    print(f"wrote {stem}.fss1 ({len(sample_set)} points)")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    sample_set = load_sample_set(args.samples)
    train_cfg = cfg.train
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)

    gt_plane = None
    grid_variants = ("trigrid", "hybrid")
    if train_cfg.lambda_mtl > 0 and train_cfg.variant in grid_variants:
        if not args.mesh:
            raise ConfigError("train.lambda_mtl",
                              "thickness supervision needs --mesh for the groundtruth plane")
        mesh, _ = _prepare_mesh(cfg, args.mesh)
        d, h, w = train_cfg.grid_dims
        if h != w:
            raise ConfigError("train.grid_dims", "thickness supervision requires H == W")
        gt_plane = exact_thickness_plane(Bvh(mesh), h)

    model = build_model(train_cfg)
    model, history = train(model, sample_set, gt_plane, train_cfg)
    save_checkpoint(model, out / "model.fssm")
    history_to_csv(history, out / "loss_history.csv")
    _echo(cfg, out)
    final = history[-1] if history else None
    if final:
        print(f"trained {train_cfg.variant} for {train_cfg.steps} steps; "
              f"final occ={final.occ_loss:.6g} total={final.total:.6g}")
    else:
        print("zero steps requested; model saved unchanged")
    return 0


def cmd_extract(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    model = load_checkpoint(args.checkpoint)
    resolution = args.resolution or cfg.eval.extract_resolution
    dense = sample_dense_grid(model, resolution)
    mesh = marching_cubes(dense)
    save_obj(mesh, out / "recon.obj")
    _echo(cfg, out)
    print(f"extracted {len(mesh.vertices)} vertices / {len(mesh.faces)} faces "
          f"at {resolution}^3 (watertight={mesh.watertight})")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    recon = load_mesh(args.recon)
    gt = load_mesh(args.gt)
    unit_scale = 1.0
    if args.transform:
        doc = json.loads(Path(args.transform).read_text(encoding="utf-8"))
        unit_scale = float(NormalizeTransform.from_dict(doc).scale)
    seed = args.seed if args.seed is not None else cfg.eval.seeds[0]
    report = evaluate(recon, gt, n=cfg.eval.n, seed=seed,
                      resolution=cfg.eval.normal_resolution, unit_scale=unit_scale)
    (out / "metrics.csv").write_text(
        report.csv_header() + "\n" + report.csv_row() + "\n", encoding="utf-8")
    (out / "metrics.txt").write_text(report.text() + "\n", encoding="utf-8")
    _echo(cfg, out)
    print(report.text())
    return 0


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    if not cfg.mesh.path:
        raise ConfigError("mesh.path", "experiment requires a mesh in the config")
    results = run_experiment(cfg, out)
    _echo(cfg, out)
    print(f"experiment complete: {len(results)} rows -> {out / 'experiment.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fss",
        description="Sampling-scheme toolkit for implicit surface reconstruction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("fixtures", help="write the canonical fixture meshes")
    common(p, config=False)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("sample", help="generate a labeled sample set")
    common(p)
    p.add_argument("--mesh", required=True)
    p.add_argument("--scheme", choices=("spatial", "dos", "fss"), default="fss")
    p.add_argument("--region-weights", help="ASCII per-face weight file")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="train an occupancy field on a sample set")
    common(p)
    p.add_argument("--samples", required=True, help="FSS1 sample file")
    p.add_argument("--mesh", help="groundtruth mesh (needed for thickness supervision)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="marching-cubes mesh from a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--resolution", type=int)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="reconstruction metrics between two meshes")
    common(p)
    p.add_argument("--recon", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--transform", help="normalization transform JSON for original units")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run the scheme-ablation matrix")
    common(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except FssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
