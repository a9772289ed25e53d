"""Scheme-ablation experiment: the full scheme x feature x loss matrix.

One cell = generate samples, train a field, extract a mesh, evaluate. The
matrix spans every (scheme, ablation, nsp, mtl, seed) combination; cells
whose effective configuration coincides (feature ablations only exist for
the fss scheme) are computed once and reported per row. Cells run
sequentially in fixed order so the report is deterministic.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bvh import Bvh
from .config import RunConfig
from .errors import FssError
from .extract import marching_cubes, sample_dense_grid
from .field import build_model, train
from .fixtures import load_region_weights
from .mesh import TriangleMesh
from .metrics import evaluate, fin_recall, grid_box_mask
from .schemes import generate_scheme
from .thickness import exact_thickness_plane, voxelize

ABLATIONS = ("full", "no_twins", "no_proximity", "no_anchors", "no_counters", "no_region")
_ABLATE_MAP = {
    "full": [],
    "no_twins": ["twins"],
    "no_proximity": ["proximity"],
    "no_anchors": ["anchors"],
    "no_counters": ["counters"],
    "no_region": ["region"],
}
SCHEMES = ("spatial", "dos", "fss")


@dataclass
class CellResult:
    scheme: str
    ablation: str
    nsp: bool
    mtl: bool
    seed: int
    cd: float
    p2s: float
    normal_err: float
    coverage_mismatch: float
    fin_recall: float | None
    final_occ_loss: float
    final_total_loss: float

    def row(self) -> str:
        fin = "" if self.fin_recall is None else f"{self.fin_recall:.9g}"
        return (
            f"{self.scheme},{self.ablation},{int(self.nsp)},{int(self.mtl)},{self.seed},"
            f"{self.cd:.9g},{self.p2s:.9g},{self.normal_err:.9g},"
            f"{self.coverage_mismatch:.9g},{fin},"
            f"{self.final_occ_loss:.9g},{self.final_total_loss:.9g}"
        )


CSV_HEADER = "scheme,ablation,nsp,mtl,seed,cd,p2s,normal_err,coverage_mismatch,fin_recall,final_occ_loss,final_total_loss"


def run_cell(mesh: TriangleMesh, bvh: Bvh, cfg: RunConfig, scheme: str, ablation: str,
             nsp: bool, mtl: bool, seed: int, gt_plane, region_weights,
             fin_mask, gt_grid) -> CellResult:
    scheme_cfg = dataclasses.replace(
        cfg.scheme,
        fss=dataclasses.replace(cfg.scheme.fss, ablate=list(_ABLATE_MAP[ablation])),
    )
    samples = generate_scheme(scheme, mesh, bvh, scheme_cfg, seed,
                              region_weights=region_weights)

    train_cfg = dataclasses.replace(
        cfg.train,
        seed=seed,
        lambda_nsp=cfg.train.lambda_nsp if nsp else 0.0,
        lambda_mtl=cfg.train.lambda_mtl if mtl else 0.0,
    )
    model = build_model(train_cfg)
    model, history = train(model, samples,
                           gt_plane if train_cfg.lambda_mtl > 0 else None, train_cfg)

    dense = sample_dense_grid(model, cfg.eval.extract_resolution)
    recon = marching_cubes(dense)
    if len(recon.faces) == 0:
        raise FssError(
            f"cell ({scheme},{ablation},nsp={nsp},mtl={mtl},seed={seed}): empty extraction"
        )

    recall = None
    if fin_mask is not None:
        grid = sample_dense_grid(model, cfg.eval.grid_resolution)
        recall = fin_recall(grid.values, gt_grid, fin_mask)

    report = evaluate(recon, mesh, n=cfg.eval.n, seed=seed,
                      resolution=cfg.eval.normal_resolution, fin_recall_value=recall)
    return CellResult(
        scheme=scheme, ablation=ablation, nsp=nsp, mtl=mtl, seed=seed,
        cd=report.cd, p2s=report.p2s, normal_err=report.normal_err,
        coverage_mismatch=report.coverage_mismatch, fin_recall=recall,
        final_occ_loss=history[-1].occ_loss if history else float("nan"),
        final_total_loss=history[-1].total if history else float("nan"),
    )


def run_experiment(cfg: RunConfig, out_dir: str | Path, log=print) -> list[CellResult]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    from .mesh import load_mesh, normalize_to_camera_space

    mesh = load_mesh(cfg.mesh.path)
    if cfg.mesh.normalize:
        mesh, _ = normalize_to_camera_space(mesh)
    bvh = Bvh(mesh)

    region_weights = None
    if cfg.mesh.region_weights:
        region_weights = load_region_weights(cfg.mesh.region_weights, len(mesh.faces))

    d, h, w = cfg.train.grid_dims
    if h != w:
        raise FssError("thickness supervision requires square grid H == W")
    gt_plane = exact_thickness_plane(bvh, h)

    fin_mask = gt_grid = None
    if cfg.mesh.fin_region:
        res = cfg.eval.grid_resolution
        gt_grid = voxelize(bvh, res, res, res).values
        fin_mask = grid_box_mask(res, cfg.mesh.fin_region["lo"], cfg.mesh.fin_region["hi"])
        fin_mask &= gt_grid

    cache: dict[tuple, CellResult] = {}
    results: list[CellResult] = []
    for scheme in SCHEMES:
        for ablation in ABLATIONS:
            for nsp in (False, True):
                for mtl in (False, True):
                    for seed in cfg.eval.seeds:
                        effective = (scheme, ablation if scheme == "fss" else "full",
                                     nsp, mtl, seed)
                        if effective not in cache:
                            log(f"[experiment] {effective}")
                            cache[effective] = run_cell(
                                mesh, bvh, cfg, scheme,
                                effective[1], nsp, mtl, seed,
                                gt_plane, region_weights, fin_mask, gt_grid,
                            )
                        cell = dataclasses.replace(cache[effective],
                                                   scheme=scheme, ablation=ablation)
                        results.append(cell)

    csv_lines = [CSV_HEADER] + [r.row() for r in results]
    (out_dir / "experiment.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    (out_dir / "experiment.txt").write_text(render_report(results), encoding="utf-8")
    return results


def _median(values) -> float:
    return float(np.median(np.asarray(values)))


def _fmt(v) -> str:
    return "-" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.5g}"


def render_report(results: list[CellResult]) -> str:
    """Text report grouping the matrix into the comparison tables the
    ablation study mirrors: scheme comparison, per-feature ablation, and
    the NSP / MTL on-off contrasts."""
    def rows(pred):
        return [r for r in results if pred(r)]

    def med_line(label, cells):
        if not cells:
            return f"  {label:<28} (no cells)"
        cd = _median([c.cd for c in cells])
        ps = _median([c.p2s for c in cells])
        ne = _median([c.normal_err for c in cells])
        fr = [c.fin_recall for c in cells if c.fin_recall is not None]
        fr_s = _fmt(_median(fr)) if fr else "-"
        return (f"  {label:<28} cd={_fmt(cd):>9} p2s={_fmt(ps):>9} "
                f"normal={_fmt(ne):>9} fin_recall={fr_s:>7}")

    out = ["scheme comparison (full features, nsp off, mtl off; medians over seeds)"]
    for scheme in SCHEMES:
        out.append(med_line(scheme, rows(
            lambda r, s=scheme: r.scheme == s and r.ablation == "full"
            and not r.nsp and not r.mtl)))
    out.append("")
    out.append("fss feature ablation (nsp off, mtl off)")
    for ab in ABLATIONS:
        out.append(med_line(ab, rows(
            lambda r, a=ab: r.scheme == "fss" and r.ablation == a
            and not r.nsp and not r.mtl)))
    out.append("")
    out.append("nsp ablation (fss, full features, mtl off)")
    for nsp in (False, True):
        out.append(med_line(f"nsp={'on' if nsp else 'off'}", rows(
            lambda r, v=nsp: r.scheme == "fss" and r.ablation == "full"
            and r.nsp == v and not r.mtl)))
    out.append("")
    out.append("mtl ablation (fss, full features, nsp off)")
    for mtl in (False, True):
        out.append(med_line(f"mtl={'on' if mtl else 'off'}", rows(
            lambda r, v=mtl: r.scheme == "fss" and r.ablation == "full"
            and not r.nsp and r.mtl == v)))
    out.append("")
    return "\n".join(out) + "\n"
