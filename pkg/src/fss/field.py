"""Desk-scale trainable occupancy fields with analytic gradients.

Two parameterizations share one training loop:

* ``TriGrid`` stores pre-sigmoid logits on a (D, H, W) lattice; occupancy
  is the trilinear interpolation of the sigmoid-activated volume, so the
  activation is applied before interpolation and every query lands in
  (0, 1) by construction.
* ``PixelAlignedField`` stores a learnable 2D feature grid indexed
  bilinearly at a point's (x, y); the feature vector concatenated with z
  feeds a small MLP for occupancy, and a separate head predicts the
  sample-point normal at train time only.

``HybridField`` averages both occupancies; the thickness supervision
applies to its grid half only.

All gradients are hand-derived and checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BinaryFormatError, ConfigError, FssError, NumericError
from .schemes import SampleSet
from .thickness import ThicknessPlane, mtl_loss


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dsigmoid_from_value(s: np.ndarray) -> np.ndarray:
    return s * (1.0 - s)


def _axis_index(coord: np.ndarray, size: int):
    """Map [-1,1] coordinates to (base index, fraction) on a voxel-center
    lattice, clamping to the boundary cell."""
    pitch = 2.0 / size
    u = np.clip((coord + 1.0) / pitch - 0.5, 0.0, size - 1.0)
    i0 = np.minimum(u.astype(np.int64), max(size - 2, 0))
    frac = u - i0
    if size == 1:
        frac = np.zeros_like(u)
    return i0, frac


class TriGrid:
    """Sigmoid voxel grid: logits (D, H, W) with D along z, H along y,
    W along x."""

    variant = "trigrid"

    def __init__(self, theta: np.ndarray):
        self.theta = np.asarray(theta, dtype=np.float64)
        if self.theta.ndim != 3:
            raise FssError("TriGrid logits must be (D, H, W)")

    @classmethod
    def zeros(cls, dims: tuple[int, int, int]) -> "TriGrid":
        return cls(np.zeros(dims))

    @classmethod
    def background(cls, dims: tuple[int, int, int], logit: float = -3.0) -> "TriGrid":
        return cls(np.full(dims, float(logit)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.theta.shape

    @property
    def pitch(self) -> tuple[float, float, float]:
        d, h, w = self.theta.shape
        return (2.0 / d, 2.0 / h, 2.0 / w)

    def params(self) -> dict[str, np.ndarray]:
        return {"theta": self.theta}

    def occupancy_volume(self) -> np.ndarray:
        return sigmoid(self.theta)

    def query(self, points: np.ndarray) -> np.ndarray:
        occ, _, _ = self.query_with_grad(points)
        return occ

    def query_with_grad(self, points: np.ndarray):
        """Trilinear interpolation of the sigmoid volume.

        Returns (occ, flat corner indices (N, 8), d occ/d theta at those
        indices (N, 8)).
        """
        points = np.atleast_2d(points)
        d, h, w = self.theta.shape
        k0, fz = _axis_index(points[:, 2], d)
        j0, fy = _axis_index(points[:, 1], h)
        i0, fx = _axis_index(points[:, 0], w)

        idx = np.empty((len(points), 8), dtype=np.int64)
        wgt = np.empty((len(points), 8))
        corner = 0
        for dz in (0, 1):
            wz = np.where(dz == 0, 1.0 - fz, fz)
            kz = np.minimum(k0 + dz, d - 1)
            for dy in (0, 1):
                wy = np.where(dy == 0, 1.0 - fy, fy)
                jy = np.minimum(j0 + dy, h - 1)
                for dx in (0, 1):
                    wx = np.where(dx == 0, 1.0 - fx, fx)
                    ix = np.minimum(i0 + dx, w - 1)
                    idx[:, corner] = (kz * h + jy) * w + ix
                    wgt[:, corner] = wz * wy * wx
                    corner += 1
        s = sigmoid(self.theta.ravel()[idx])
        occ = np.einsum("nc,nc->n", wgt, s)
        dtheta = wgt * dsigmoid_from_value(s)
        return occ, idx, dtheta


class _Linear:
    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = weight
        self.bias = bias


def _init_linear(rng, n_out: int, n_in: int) -> _Linear:
    scale = 1.0 / np.sqrt(n_in)
    return _Linear(rng.normal(0.0, scale, size=(n_out, n_in)), np.zeros(n_out))


class PixelAlignedField:
    """Learnable feature image + occupancy MLP + train-time normal head."""

    variant = "pixel_aligned"
    HIDDEN = 16

    def __init__(self, features: np.ndarray, occ_layers: list[_Linear], normal_layers: list[_Linear]):
        self.features = np.asarray(features, dtype=np.float64)
        if self.features.ndim != 3:
            raise FssError("features must be (C, H, W)")
        self.occ_layers = occ_layers
        self.normal_layers = normal_layers

    @classmethod
    def create(cls, channels: int = 8, resolution: int = 32, seed: int = 0,
               background_logit: float = -2.0) -> "PixelAlignedField":
        rng = np.random.default_rng([seed, 77])
        occ = [
            _init_linear(rng, cls.HIDDEN, channels + 1),
            _init_linear(rng, cls.HIDDEN, cls.HIDDEN),
            _init_linear(rng, 1, cls.HIDDEN),
        ]
        occ[-1].bias[:] = background_logit
        normal = [
            _init_linear(rng, cls.HIDDEN, channels + 1),
            _init_linear(rng, 3, cls.HIDDEN),
        ]
        features = np.zeros((channels, resolution, resolution))
        return cls(features, occ, normal)

    @classmethod
    def zeros(cls, channels: int = 8, resolution: int = 32) -> "PixelAlignedField":
        zero = lambda o, i: _Linear(np.zeros((o, i)), np.zeros(o))
        occ = [zero(cls.HIDDEN, channels + 1), zero(cls.HIDDEN, cls.HIDDEN), zero(1, cls.HIDDEN)]
        normal = [zero(cls.HIDDEN, channels + 1), zero(3, cls.HIDDEN)]
        return cls(np.zeros((channels, resolution, resolution)), occ, normal)

    @property
    def channels(self) -> int:
        return self.features.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        out = {"features": self.features}
        for tag, layers in (("occ", self.occ_layers), ("normal", self.normal_layers)):
            for i, layer in enumerate(layers):
                out[f"{tag}{i}_w"] = layer.weight
                out[f"{tag}{i}_b"] = layer.bias
        return out

    # -- feature sampling ----------------------------------------------------

    def _bilinear(self, points: np.ndarray):
        c, hf, wf = self.features.shape
        j0, fy = _axis_index(points[:, 1], hf)
        i0, fx = _axis_index(points[:, 0], wf)
        idx = np.empty((len(points), 4), dtype=np.int64)
        wgt = np.empty((len(points), 4))
        corner = 0
        for dy in (0, 1):
            wy = np.where(dy == 0, 1.0 - fy, fy)
            jy = np.minimum(j0 + dy, hf - 1)
            for dx in (0, 1):
                wx = np.where(dx == 0, 1.0 - fx, fx)
                ix = np.minimum(i0 + dx, wf - 1)
                idx[:, corner] = jy * wf + ix
                wgt[:, corner] = wy * wx
                corner += 1
        flat = self.features.reshape(c, -1)
        f = np.einsum("nk,cnk->nc", wgt, flat[:, idx])
        return f, idx, wgt

    def _mlp_forward(self, layers, x, final_sigmoid: bool):
        acts = [x]
        for li, layer in enumerate(layers):
            z = acts[-1] @ layer.weight.T + layer.bias
            last = li == len(layers) - 1
            if last:
                acts.append(sigmoid(z) if final_sigmoid else z)
            else:
                acts.append(np.tanh(z))
        return acts

    def _mlp_backward(self, layers, acts, d_out, final_sigmoid: bool):
        grads = {}
        delta = d_out
        for li in range(len(layers) - 1, -1, -1):
            layer = layers[li]
            out = acts[li + 1]
            if li == len(layers) - 1:
                dz = delta * dsigmoid_from_value(out) if final_sigmoid else delta
            else:
                dz = delta * (1.0 - out**2)
            grads[f"{li}_w"] = dz.T @ acts[li]
            grads[f"{li}_b"] = dz.sum(axis=0)
            delta = dz @ layer.weight
        return grads, delta  # delta = gradient w.r.t. the input vector

    def occ_forward(self, points: np.ndarray):
        points = np.atleast_2d(points)
        f, idx, wgt = self._bilinear(points)
        x = np.concatenate([f, points[:, 2:3]], axis=1)
        acts = self._mlp_forward(self.occ_layers, x, final_sigmoid=True)
        occ = acts[-1][:, 0]
        return occ, (acts, idx, wgt)

    def query(self, points: np.ndarray) -> np.ndarray:
        return self.occ_forward(points)[0]

    def occ_backward(self, cache, d_occ: np.ndarray) -> dict[str, np.ndarray]:
        acts, idx, wgt = cache
        layer_grads, d_input = self._mlp_backward(
            self.occ_layers, acts, d_occ[:, None], final_sigmoid=True
        )
        grads = {f"occ{k}": v for k, v in layer_grads.items()}
        grads["features"] = self._scatter_features(idx, wgt, d_input[:, :-1])
        return grads

    def normal_forward(self, points: np.ndarray):
        points = np.atleast_2d(points)
        f, idx, wgt = self._bilinear(points)
        x = np.concatenate([f, points[:, 2:3]], axis=1)
        acts = self._mlp_forward(self.normal_layers, x, final_sigmoid=False)
        return acts[-1], (acts, idx, wgt)

    def query_normal(self, points: np.ndarray) -> np.ndarray:
        """Raw (unnormalized) output of the normal head."""
        return self.normal_forward(points)[0]

    def normal_backward(self, cache, d_out: np.ndarray) -> dict[str, np.ndarray]:
        acts, idx, wgt = cache
        layer_grads, d_input = self._mlp_backward(
            self.normal_layers, acts, d_out, final_sigmoid=False
        )
        grads = {f"normal{k}": v for k, v in layer_grads.items()}
        grads["features"] = self._scatter_features(idx, wgt, d_input[:, :-1])
        return grads

    def _scatter_features(self, idx, wgt, d_f):
        c = self.channels
        flat = np.zeros((c, self.features.shape[1] * self.features.shape[2]))
        for k in range(4):
            np.add.at(flat.T, idx[:, k], d_f * wgt[:, k : k + 1])
        return flat.reshape(self.features.shape)


class HybridField:
    """Average of a sigmoid grid and a pixel-aligned field; the thickness
    loss trains the grid half only."""

    variant = "hybrid"

    def __init__(self, grid: TriGrid, pixel: PixelAlignedField):
        self.grid = grid
        self.pixel = pixel

    def params(self) -> dict[str, np.ndarray]:
        out = {f"grid.{k}": v for k, v in self.grid.params().items()}
        out.update({f"pixel.{k}": v for k, v in self.pixel.params().items()})
        return out

    def query(self, points: np.ndarray) -> np.ndarray:
        return 0.5 * (self.grid.query(points) + self.pixel.query(points))


OccupancyModel = TriGrid | PixelAlignedField | HybridField


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

@dataclass
class LossReport:
    step: int
    occ_loss: float
    nsp_loss: float
    mtl_loss: float
    total: float


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    steps: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lambda_nsp: float = 0.1
    lambda_mtl: float = 0.1
    minibatch: int = 2048
    seed: int = 0
    variant: str = "trigrid"
    grid_dims: tuple[int, int, int] = (64, 64, 64)
    feature_channels: int = 8
    feature_resolution: int = 32
    init_logit: float = -3.0

    def validate(self, path="train"):
        if self.learning_rate <= 0:
            raise ConfigError(f"{path}.learning_rate", "must be positive")
        if self.steps < 0:
            raise ConfigError(f"{path}.steps", "must be >= 0")
        if self.lambda_nsp < 0:
            raise ConfigError(f"{path}.lambda_nsp", "must be >= 0")
        if self.lambda_mtl < 0:
            raise ConfigError(f"{path}.lambda_mtl", "must be >= 0")
        if self.minibatch < 1:
            raise ConfigError(f"{path}.minibatch", "must be >= 1")
        if self.variant not in ("trigrid", "pixel_aligned", "hybrid"):
            raise ConfigError(f"{path}.variant", f"unknown variant {self.variant!r}")
        if len(self.grid_dims) != 3 or any(int(v) < 1 for v in self.grid_dims):
            raise ConfigError(f"{path}.grid_dims", "need three positive dims")
        return self

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "steps": self.steps,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "lambda_nsp": self.lambda_nsp,
            "lambda_mtl": self.lambda_mtl,
            "minibatch": self.minibatch,
            "seed": self.seed,
            "variant": self.variant,
            "grid_dims": list(self.grid_dims),
            "feature_channels": self.feature_channels,
            "feature_resolution": self.feature_resolution,
            "init_logit": self.init_logit,
        }


def _noisy_grid(cfg: TrainConfig) -> TriGrid:
    # tiny seeded jitter: an exactly-constant field has zero spatial
    # gradient, which parks the normalized-gradient loss on its eps guard
    rng = np.random.default_rng([cfg.seed, 55])
    dims = tuple(int(v) for v in cfg.grid_dims)
    return TriGrid(cfg.init_logit + 0.01 * rng.standard_normal(dims))


def build_model(cfg: TrainConfig) -> OccupancyModel:
    if cfg.variant == "trigrid":
        return _noisy_grid(cfg)
    if cfg.variant == "pixel_aligned":
        return PixelAlignedField.create(cfg.feature_channels, cfg.feature_resolution, cfg.seed)
    return HybridField(
        _noisy_grid(cfg),
        PixelAlignedField.create(cfg.feature_channels, cfg.feature_resolution, cfg.seed),
    )


def occupancy_mse(model, positions, labels):
    """MSE between predicted occupancy and labels, with parameter grads."""
    n = len(positions)
    if isinstance(model, TriGrid):
        occ, idx, dtheta = model.query_with_grad(positions)
        diff = occ - labels
        d_occ = 2.0 * diff / n
        g = np.zeros(model.theta.size)
        np.add.at(g, idx, d_occ[:, None] * dtheta)
        return float(np.mean(diff**2)), {"theta": g.reshape(model.theta.shape)}
    if isinstance(model, PixelAlignedField):
        occ, cache = model.occ_forward(positions)
        diff = occ - labels
        grads = model.occ_backward(cache, 2.0 * diff / n)
        return float(np.mean(diff**2)), grads
    # hybrid: occ = (grid + pixel) / 2
    occ_g, idx, dtheta = model.grid.query_with_grad(positions)
    occ_p, cache = model.pixel.occ_forward(positions)
    diff = 0.5 * (occ_g + occ_p) - labels
    d_occ = 2.0 * diff / n
    g = np.zeros(model.grid.theta.size)
    np.add.at(g, idx, (0.5 * d_occ)[:, None] * dtheta)
    grads = {"grid.theta": g.reshape(model.grid.theta.shape)}
    for k, v in model.pixel.occ_backward(cache, 0.5 * d_occ).items():
        grads[f"pixel.{k}"] = v
    return float(np.mean(diff**2)), grads


def nsp_loss_pixel(pix: PixelAlignedField, positions, gt_normals, param_prefix=""):
    """MSE between the normal head's raw output and the unit groundtruth
    normals (summed over components, averaged over samples)."""
    n = len(positions)
    pred, cache = pix.normal_forward(positions)
    diff = pred - gt_normals
    loss = float(np.sum(diff**2) / n)
    grads = pix.normal_backward(cache, 2.0 * diff / n)
    if param_prefix:
        grads = {f"{param_prefix}{k}": v for k, v in grads.items()}
    return loss, grads


def nsp_loss_trigrid(grid: TriGrid, positions, gt_normals, eps_norm: float = 1e-6,
                     param_key: str = "theta"):
    """Field-gradient alignment: the negated, normalized central-difference
    gradient of the occupancy volume should match the groundtruth normal.

    The probe step is one voxel pitch per axis.
    """
    positions = np.atleast_2d(positions)
    n = len(positions)
    pitch = grid.pitch  # (dz, dy, dx)
    steps = (pitch[2], pitch[1], pitch[0])  # x, y, z order

    occs, idxs, dthetas = [], [], []
    for axis in range(3):
        h = steps[axis]
        for sign in (1.0, -1.0):
            q = positions.copy()
            q[:, axis] += sign * h
            occ, idx, dth = grid.query_with_grad(q)
            occs.append(occ)
            idxs.append(idx)
            dthetas.append(dth)

    g = np.stack(
        [(occs[2 * a] - occs[2 * a + 1]) / (2.0 * steps[a]) for a in range(3)], axis=1
    )
    norm = np.linalg.norm(g, axis=1)
    m = np.maximum(norm, eps_norm)
    n_hat = -g / m[:, None]
    r = n_hat - gt_normals
    loss = float(np.sum(r**2) / n)

    d_nhat = 2.0 * r / n
    # d n_hat / d g: -(I - g g^T/m^2)/m when over the floor, else -I/eps
    over = norm > eps_norm
    gg = np.einsum("nd,nd->n", d_nhat, g)
    d_g = np.where(
        over[:, None],
        -(d_nhat - g * (gg / np.maximum(m, 1e-300) ** 2)[:, None]) / m[:, None],
        -d_nhat / eps_norm,
    )

    theta_grad = np.zeros(grid.theta.size)
    for axis in range(3):
        h = steps[axis]
        scale_plus = d_g[:, axis] / (2.0 * h)
        np.add.at(theta_grad, idxs[2 * axis], scale_plus[:, None] * dthetas[2 * axis])
        np.add.at(theta_grad, idxs[2 * axis + 1], -scale_plus[:, None] * dthetas[2 * axis + 1])
    return loss, {param_key: theta_grad.reshape(grid.theta.shape)}


def mtl_loss_trigrid(grid: TriGrid, gt_plane: ThicknessPlane, param_key: str = "theta"):
    """Thickness-plane MSE of the sigmoid volume against groundtruth."""
    vol = grid.occupancy_volume()
    dz = grid.pitch[0]
    plane = dz * vol.sum(axis=0)
    loss, d_plane = mtl_loss(plane, gt_plane.values)
    d_theta = d_plane[None, :, :] * dz * dsigmoid_from_value(vol)
    return loss, {param_key: d_theta}


def compute_losses(model, positions, labels, gt_normals, gt_plane, cfg: TrainConfig,
                   step: int = 0):
    """Weighted occupancy + NSP + MTL objective with accumulated gradients."""
    occ_loss, grads = occupancy_mse(model, positions, labels)

    nsp = 0.0
    if cfg.lambda_nsp > 0.0:
        if isinstance(model, TriGrid):
            nsp, g_nsp = nsp_loss_trigrid(model, positions, gt_normals)
        elif isinstance(model, PixelAlignedField):
            nsp, g_nsp = nsp_loss_pixel(model, positions, gt_normals)
        else:
            nsp, g_nsp = nsp_loss_pixel(model.pixel, positions, gt_normals, param_prefix="pixel.")
        for k, v in g_nsp.items():
            grads[k] = grads.get(k, 0.0) + cfg.lambda_nsp * v

    mtl = 0.0
    grid = model if isinstance(model, TriGrid) else getattr(model, "grid", None)
    if cfg.lambda_mtl > 0.0 and grid is not None:
        if gt_plane is None:
            raise FssError("lambda_mtl > 0 requires a groundtruth thickness plane")
        key = "theta" if isinstance(model, TriGrid) else "grid.theta"
        mtl, g_mtl = mtl_loss_trigrid(grid, gt_plane, param_key=key)
        for k, v in g_mtl.items():
            grads[k] = grads.get(k, 0.0) + cfg.lambda_mtl * v

    total = occ_loss + cfg.lambda_nsp * nsp + cfg.lambda_mtl * mtl
    report = LossReport(step=step, occ_loss=occ_loss, nsp_loss=nsp, mtl_loss=mtl, total=total)
    return report, grads


# ---------------------------------------------------------------------------
# optimizer and training loop
# ---------------------------------------------------------------------------

class Adam:
    """Standard first-order adaptive optimizer with bias correction."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k, p in params.items():
            g = grads.get(k)
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(model, sample_set: SampleSet, gt_plane: ThicknessPlane | None, cfg: TrainConfig):
    """Run the seeded minibatch loop; returns (model, history).

    Minibatches cycle through seeded permutations of the sample set;
    parameters update in place. A non-finite loss aborts with the step
    index.
    """
    if len(sample_set) == 0:
        raise FssError("empty sample set")
    params = model.params()
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng([cfg.seed, 100])
    order = rng.permutation(len(sample_set))
    cursor = 0
    history: list[LossReport] = []
    for step in range(cfg.steps):
        take = min(cfg.minibatch, len(sample_set))
        if cursor + take > len(order):
            order = rng.permutation(len(sample_set))
            cursor = 0
        batch = order[cursor : cursor + take]
        cursor += take
        report, grads = compute_losses(
            model,
            sample_set.positions[batch],
            sample_set.labels[batch],
            sample_set.normals[batch],
            gt_plane,
            cfg,
            step=step,
        )
        if not np.isfinite(report.total):
            raise NumericError("non-finite training loss", step=step)
        opt.step(params, grads)
        history.append(report)
    return model, history


def history_to_csv(history: list[LossReport], path: str | Path) -> None:
    lines = ["step,occ,nsp,mtl,total"]
    for r in history:
        lines.append(f"{r.step},{r.occ_loss:.9g},{r.nsp_loss:.9g},{r.mtl_loss:.9g},{r.total:.9g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_FSSM_MAGIC = b"FSSM"
_FSSM_VERSION = 1
_VARIANT_TAGS = {"trigrid": 0, "pixel_aligned": 1, "hybrid": 2}


def _write_array(fh, arr: np.ndarray) -> None:
    fh.write(arr.astype("<f4").tobytes())


def _pixel_param_arrays(pix: PixelAlignedField) -> list[np.ndarray]:
    arrays = [pix.features]
    for layers in (pix.occ_layers, pix.normal_layers):
        for layer in layers:
            arrays += [layer.weight, layer.bias]
    return arrays


def save_checkpoint(model, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_FSSM_MAGIC)
        fh.write(struct.pack("<IB", _FSSM_VERSION, _VARIANT_TAGS[model.variant]))
        if model.variant in ("trigrid", "hybrid"):
            grid = model if model.variant == "trigrid" else model.grid
            fh.write(struct.pack("<III", *grid.dims))
            _write_array(fh, grid.theta)
        if model.variant in ("pixel_aligned", "hybrid"):
            pix = model if model.variant == "pixel_aligned" else model.pixel
            c, hf, wf = pix.features.shape
            fh.write(struct.pack("<III", c, hf, wf))
            for arr in _pixel_param_arrays(pix):
                _write_array(fh, arr)


def _read_exact(fh, count: int) -> bytes:
    raw = fh.read(count)
    if len(raw) != count:
        raise BinaryFormatError("truncated checkpoint")
    return raw


def _read_array(fh, shape) -> np.ndarray:
    n = int(np.prod(shape))
    raw = _read_exact(fh, 4 * n)
    return np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)


def load_checkpoint(path: str | Path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _FSSM_MAGIC:
            raise BinaryFormatError(f"{path}: bad magic {magic!r}, expected {_FSSM_MAGIC!r}")
        version, tag = struct.unpack("<IB", _read_exact(fh, 5))
        if version != _FSSM_VERSION:
            raise BinaryFormatError(f"{path}: unsupported version {version}")
        variant = {v: k for k, v in _VARIANT_TAGS.items()}.get(tag)
        if variant is None:
            raise BinaryFormatError(f"{path}: unknown variant tag {tag}")
        grid = pix = None
        if variant in ("trigrid", "hybrid"):
            dims = struct.unpack("<III", _read_exact(fh, 12))
            grid = TriGrid(_read_array(fh, dims))
        if variant in ("pixel_aligned", "hybrid"):
            c, hf, wf = struct.unpack("<III", _read_exact(fh, 12))
            shell = PixelAlignedField.zeros(c, 1)  # layer shapes depend only on c
            pix = PixelAlignedField(np.zeros((c, hf, wf)), shell.occ_layers, shell.normal_layers)
            pix.features = _read_array(fh, (c, hf, wf))
            for layers in (pix.occ_layers, pix.normal_layers):
                for layer in layers:
                    layer.weight = _read_array(fh, layer.weight.shape)
                    layer.bias = _read_array(fh, layer.bias.shape)
    if variant == "trigrid":
        return grid
    if variant == "pixel_aligned":
        return pix
    return HybridField(grid, pix)
