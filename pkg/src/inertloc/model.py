"""Two-branch sequence-to-likelihood localizer.

The velocity branch compresses a velocity window with a causal TCN, encodes it
with transformer blocks, and decodes each token into a location likelihood
raster. The autoregressive location branch encodes prior likelihood maps,
injects velocity features via cross-attention, and predicts each next frame.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .errors import ConfigError, InvalidInputError, TrainingDiverged, WindowError
from .gridworld import Trajectory
from .nn import ParamStore, Tensor

INFER_WEIGHT_MAX = 1.0
INFER_WEIGHT_MIN = 0.05


@dataclass
class ModelConfig:
    d: int = 32
    width: int = 48
    height: int = 48
    compress: int = 10
    enc_blocks: int = 2
    layers_per_block: int = 2
    heads: int = 8
    loc_history: int = 20
    decoder_channels: tuple = (16, 16, 8)
    enc_conv_channels: tuple = (8, 16, 32)
    ffn_mult: int = 4

    def __post_init__(self):
        if self.d % 4 != 0:
            raise ConfigError("feature dim d must be divisible by 4")
        if self.d_prime % self.heads != 0:
            raise ConfigError(
                f"token dim {self.d_prime} not divisible by {self.heads} heads")
        if self.compress < 1:
            raise ConfigError("compress must be >= 1")
        if self.volume_size > self.d_prime:
            raise ConfigError(
                f"decoder volume {self.volume_size} exceeds token dim {self.d_prime}")

    @property
    def d_prime(self) -> int:
        return 3 * self.d // 2

    @property
    def w0(self) -> int:
        return -(-self.width // 8)

    @property
    def h0(self) -> int:
        return -(-self.height // 8)

    @property
    def c0(self) -> int:
        return 1

    @property
    def volume_size(self) -> int:
        return self.w0 * self.h0 * self.c0

    def conv_out_hw(self):
        """Spatial extent after the location branch's three stride-2 convs."""
        h, w = self.height, self.width
        for _ in range(3):
            h = (h + 2 - 4) // 2 + 1
            w = (w + 2 - 4) // 2 + 1
        return h, w

    def to_json(self) -> str:
        d = asdict(self)
        d["decoder_channels"] = list(self.decoder_channels)
        d["enc_conv_channels"] = list(self.enc_conv_channels)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        d = json.loads(text)
        d["decoder_channels"] = tuple(d["decoder_channels"])
        d["enc_conv_channels"] = tuple(d["enc_conv_channels"])
        return cls(**d)


def positional_encoding(t, dim: int, d_prime: int) -> np.ndarray:
    """Trigonometric encoding [cos(w_i t), sin(w_i t)], w_i = 10000^(-i/d')."""
    if dim % 2 != 0:
        raise ConfigError("positional encoding dimension must be even")
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    i = np.arange(1, dim // 2 + 1, dtype=np.float64)
    w = np.exp(-math.log(10000.0) * i / d_prime)
    phase = t_arr[:, None] * w[None, :]
    enc = np.concatenate([np.cos(phase), np.sin(phase)], axis=1)
    return enc if np.ndim(t) else enc[0]


def teacher_ratio(epoch: int, hold: int = 50, step: float = 0.01,
                  period: int = 5) -> float:
    """Teacher-forcing ratio: 1.0 through the hold, then stepped down each period."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    drops = max(0, (epoch - (hold - period)) // period)
    return min(1.0, max(0.0, 1.0 - step * drops))


def inference_weights(n: int = 20) -> np.ndarray:
    """Arithmetic estimate weights from 1.0 down to 0.05."""
    return np.linspace(INFER_WEIGHT_MAX, INFER_WEIGHT_MIN, n)


def uniform_map(height: int, width: int) -> np.ndarray:
    return np.full((height, width), 1.0 / (height * width))


def one_hot_map(pixel, height: int, width: int) -> np.ndarray:
    x, y = int(round(pixel[0])), int(round(pixel[1]))
    if not (0 <= x < width and 0 <= y < height):
        raise IndexError(f"pixel {(x, y)} outside {width}x{height} map")
    m = np.zeros((height, width))
    m[y, x] = 1.0
    return m


def argmax_pixel(likelihood: np.ndarray):
    idx = int(np.argmax(likelihood))
    h, w = likelihood.shape
    return idx % w, idx // w


# ---------------------------------------------------------------------------
# Parameter construction


def build_params(cfg: ModelConfig, rng: np.random.Generator) -> ParamStore:
    store = ParamStore()
    dp = cfg.d_prime

    def encoder_layer(prefix: str, cross: bool):
        for head in ("q", "k", "v", "o"):
            store.add_affine(f"{prefix}.att.{head}", dp, dp, rng)
        store.add_layer_norm(f"{prefix}.ln1", dp)
        if cross:
            for head in ("q", "k", "v", "o"):
                store.add_affine(f"{prefix}.xatt.{head}", dp, dp, rng)
            store.add_layer_norm(f"{prefix}.lnx", dp)
        store.add_affine(f"{prefix}.ffn1", dp, cfg.ffn_mult * dp, rng)
        store.add_affine(f"{prefix}.ffn2", cfg.ffn_mult * dp, dp, rng)
        store.add_layer_norm(f"{prefix}.ln2", dp)

    def decoder(prefix: str):
        c1, c2, c3 = cfg.decoder_channels
        store.add_conv2d(f"{prefix}.dec1", 4, 4, cfg.c0, c1, rng)
        store.add_conv2d(f"{prefix}.dec2", 4, 4, c1, c2, rng)
        store.add_conv2d(f"{prefix}.dec3", 4, 4, c2, c3, rng)
        store.add_per_pixel(f"{prefix}.pp", cfg.height, cfg.width, c3, 1, rng)

    store.add_conv1d("vb.tcn1", 4, 2, cfg.d, rng)
    store.add_conv1d("vb.tcn2", 4, cfg.d, cfg.d, rng)
    for blk in range(cfg.enc_blocks):
        for lay in range(cfg.layers_per_block):
            encoder_layer(f"vb.enc{blk}{lay}", cross=False)
    decoder("vb")

    e1, e2, e3 = cfg.enc_conv_channels
    store.add_conv2d("lb.cnn1", 4, 4, 1, e1, rng)
    store.add_conv2d("lb.cnn2", 4, 4, e1, e2, rng)
    store.add_conv2d("lb.cnn3", 4, 4, e2, e3, rng)
    fh, fw = cfg.conv_out_hw()
    store.add_affine("lb.tok", fh * fw * e3, dp, rng)
    for blk in range(cfg.enc_blocks):
        for lay in range(cfg.layers_per_block):
            encoder_layer(f"lb.enc{blk}{lay}", cross=True)
    decoder("lb")
    return store


# ---------------------------------------------------------------------------
# Forward passes


def _encoder_layer(p: ParamStore, prefix: str, x: Tensor, heads: int,
                   mask=None, cross_kv: Tensor | None = None,
                   cross_mask=None) -> Tensor:
    a = nn.multi_head_attention(
        x, x, p[f"{prefix}.att.q.w"], p[f"{prefix}.att.q.b"],
        p[f"{prefix}.att.k.w"], p[f"{prefix}.att.k.b"],
        p[f"{prefix}.att.v.w"], p[f"{prefix}.att.v.b"],
        p[f"{prefix}.att.o.w"], p[f"{prefix}.att.o.b"], heads, mask=mask)
    x = nn.layer_norm(nn.add(x, a), p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.s"])
    if cross_kv is not None:
        a = nn.multi_head_attention(
            x, cross_kv, p[f"{prefix}.xatt.q.w"], p[f"{prefix}.xatt.q.b"],
            p[f"{prefix}.xatt.k.w"], p[f"{prefix}.xatt.k.b"],
            p[f"{prefix}.xatt.v.w"], p[f"{prefix}.xatt.v.b"],
            p[f"{prefix}.xatt.o.w"], p[f"{prefix}.xatt.o.b"], heads,
            mask=cross_mask)
        x = nn.layer_norm(nn.add(x, a), p[f"{prefix}.lnx.g"], p[f"{prefix}.lnx.s"])
    h = nn.affine(x, p[f"{prefix}.ffn1.w"], p[f"{prefix}.ffn1.b"])
    h = nn.affine(nn.relu(h), p[f"{prefix}.ffn2.w"], p[f"{prefix}.ffn2.b"])
    return nn.layer_norm(nn.add(x, h), p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.s"])


def _decode_tokens(p: ParamStore, prefix: str, cfg: ModelConfig,
                   tokens: Tensor) -> Tensor:
    """Token embeddings (n, d') -> per-token likelihood logits (n, H*W)."""
    n = tokens.shape[0]
    x = nn.slice_last(tokens, 0, cfg.volume_size)
    x = nn.reshape(x, (n, cfg.h0, cfg.w0, cfg.c0))
    for layer in ("dec1", "dec2", "dec3"):
        x = nn.relu(nn.transpose_conv2d(x, p[f"{prefix}.{layer}.w"],
                                        p[f"{prefix}.{layer}.b"], stride=2, pad=1))
    full_h, full_w = x.shape[1], x.shape[2]
    oy = (full_h - cfg.height) // 2
    ox = (full_w - cfg.width) // 2
    if (oy, ox) != (0, 0) or (full_h, full_w) != (cfg.height, cfg.width):
        x = nn.crop2d(x, oy, ox, cfg.height, cfg.width)
    x = nn.per_pixel_affine(x, p[f"{prefix}.pp.w"], p[f"{prefix}.pp.b"])
    return nn.reshape(x, (n, cfg.height * cfg.width))


@dataclass
class VelocityBranchOut:
    embeddings: Tensor
    mid: Tensor
    logits: Tensor

    def likelihoods(self) -> np.ndarray:
        """(n, H, W) normalized maps (no gradient)."""
        with nn.no_grad():
            probs = nn.softmax_lastdim(nn.constant(self.logits.data)).data
        return probs


def velocity_branch_forward(p: ParamStore, cfg: ModelConfig,
                            vel_window: np.ndarray) -> VelocityBranchOut:
    """Velocity window (T, 2) -> per-token likelihood logits.

    T must be a multiple of the compression factor; each output token
    summarizes the last `compress` raw frames and carries the likelihood of
    the position reached at its end.
    """
    vel_window = np.asarray(vel_window, dtype=np.float64)
    if vel_window.ndim != 2 or vel_window.shape[1] != 2:
        raise InvalidInputError("velocity window must be (T, 2)")
    t_len = vel_window.shape[0]
    if t_len == 0 or t_len % cfg.compress != 0:
        raise WindowError(
            f"window length {t_len} not a positive multiple of {cfg.compress}")
    n = t_len // cfg.compress
    x = nn.constant(vel_window)
    x = nn.relu(nn.conv1d_causal(x, p["vb.tcn1.w"], p["vb.tcn1.b"], dilation=1))
    x = nn.relu(nn.conv1d_causal(x, p["vb.tcn2.w"], p["vb.tcn2.b"], dilation=2))
    # Keep the causal output at the last raw frame of each compression block.
    x = nn.reshape(x, (n, cfg.compress, cfg.d))
    x = nn.transpose(x, (0, 2, 1))
    x = nn.reshape(nn.slice_last(x, cfg.compress - 1, cfg.compress), (n, cfg.d))
    pe = positional_encoding(np.arange(n), cfg.d // 2, cfg.d_prime)
    x = nn.concat_last(x, nn.constant(pe))
    mid = None
    for blk in range(cfg.enc_blocks):
        for lay in range(cfg.layers_per_block):
            x = _encoder_layer(p, f"vb.enc{blk}{lay}", x, cfg.heads)
        if blk == 0:
            mid = x
    logits = _decode_tokens(p, "vb", cfg, x)
    return VelocityBranchOut(x, mid, logits)


def location_branch_forward(p: ParamStore, cfg: ModelConfig,
                            prior_maps: np.ndarray, mid: Tensor) -> Tensor:
    """Prior likelihood maps (n, H, W) + velocity mid-features -> next-step logits.

    The token initialized with the likelihood of frame i yields the estimate
    for frame i+1; self- and cross-attention are causally masked so token i
    sees only history up to i.
    """
    prior_maps = np.asarray(prior_maps, dtype=np.float64)
    if prior_maps.ndim != 3 or prior_maps.shape[1:] != (cfg.height, cfg.width):
        raise InvalidInputError("prior maps must be (n, H, W)")
    n = prior_maps.shape[0]
    if n < 1 or n > cfg.loc_history:
        raise WindowError(f"history length {n} outside [1, {cfg.loc_history}]")
    if mid.shape[0] != n:
        raise WindowError("mid-features must align with the prior-map tokens")
    x = nn.constant(prior_maps[..., None])
    for layer in ("cnn1", "cnn2", "cnn3"):
        x = nn.relu(nn.conv2d(x, p[f"lb.{layer}.w"], p[f"lb.{layer}.b"],
                              stride=2, pad=1))
    x = nn.reshape(x, (n, int(np.prod(x.shape[1:]))))
    x = nn.affine(x, p["lb.tok.w"], p["lb.tok.b"])
    pe = positional_encoding(np.arange(n), cfg.d_prime, cfg.d_prime)
    x = nn.add(x, nn.constant(pe))
    mask = nn.causal_mask(n)
    for blk in range(cfg.enc_blocks):
        for lay in range(cfg.layers_per_block):
            x = _encoder_layer(p, f"lb.enc{blk}{lay}", x, cfg.heads,
                               mask=mask, cross_kv=mid, cross_mask=mask)
    return _decode_tokens(p, "lb", cfg, x)


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainConfig:
    epochs: int = 100
    batch: int = 8
    window_tokens: int = 12
    seed: int = 0
    base_lr: float = 1e-4
    warmup: int = 30
    plateau_patience: int = 10
    lr_factor: float = 0.75
    weight_decay: float = 0.01
    teacher_hold: int = 50
    teacher_step: float = 0.01
    teacher_period: int = 5
    steps_per_epoch: int | None = None
    val_fraction: float = 1.0 / 6.0

    def __post_init__(self):
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.epochs < 1 or self.batch < 1 or self.window_tokens < 1:
            raise ConfigError("epochs, batch and window_tokens must be positive")


@dataclass
class TrainWindow:
    """One training example: velocity slice plus token-frame target pixels."""

    vel: np.ndarray       # (10 * L, 2)
    targets: np.ndarray   # (L + 1, 2) pixel positions of token-frames 0..L


class TwoBranchLocalizer:
    """Model wrapper owning a config and a parameter store."""

    def __init__(self, cfg: ModelConfig, params: ParamStore | None = None,
                 seed: int = 0):
        self.cfg = cfg
        self.params = params if params is not None else build_params(
            cfg, np.random.default_rng(seed))

    # -- persistence --------------------------------------------------------

    def save(self, path):
        self.params.save(path)
        with open(str(path) + ".json", "w") as f:
            f.write(self.cfg.to_json())

    @classmethod
    def load(cls, path) -> "TwoBranchLocalizer":
        with open(str(path) + ".json") as f:
            cfg = ModelConfig.from_json(f.read())
        return cls(cfg, params=ParamStore.load(path))

    # -- target helpers ------------------------------------------------------

    def _flat_targets(self, pixels: np.ndarray) -> np.ndarray:
        xs = np.rint(pixels[:, 0]).astype(int)
        ys = np.rint(pixels[:, 1]).astype(int)
        if np.any((xs < 0) | (xs >= self.cfg.width) | (ys < 0)
                  | (ys >= self.cfg.height)):
            raise IndexError("target pixel outside the map")
        return ys * self.cfg.width + xs

    def _gt_maps(self, pixels: np.ndarray) -> np.ndarray:
        maps = np.zeros((len(pixels), self.cfg.height, self.cfg.width))
        for i, (x, y) in enumerate(pixels):
            maps[i] = one_hot_map((x, y), self.cfg.height, self.cfg.width)
        return maps

    # -- training ------------------------------------------------------------

    def window_loss(self, window: TrainWindow, r_teacher: float,
                    rng: np.random.Generator) -> Tensor:
        """Two-pass scheduled-sampling loss for one window (both branches)."""
        cfg = self.cfg
        vb = velocity_branch_forward(self.params, cfg, window.vel)
        n = vb.logits.shape[0]
        if window.targets.shape[0] != n + 1:
            raise InvalidInputError("targets must cover token-frames 0..L")
        flat = self._flat_targets(window.targets)
        vel_loss = nn.cross_entropy_logits(vb.logits, flat[1:])

        gt_inputs = self._gt_maps(window.targets[:-1])
        if r_teacher >= 1.0:
            inputs = gt_inputs
        else:
            with nn.no_grad():
                mid_const = nn.constant(vb.mid.data)
                logits1 = location_branch_forward(self.params, cfg, gt_inputs,
                                                  mid_const)
                preds1 = nn.softmax_lastdim(logits1).data.reshape(
                    n, cfg.height, cfg.width)
            keep = rng.random(n) < r_teacher
            keep[0] = True  # token 0 is the init frame; it has no prior estimate
            inputs = np.where(keep[:, None, None], gt_inputs,
                              np.concatenate([gt_inputs[:1], preds1[:-1]], axis=0))
        logits2 = location_branch_forward(self.params, cfg, inputs, vb.mid)
        loc_loss = nn.cross_entropy_logits(logits2, flat[1:])
        return nn.add(vel_loss, loc_loss)

    def train_step(self, batch: list[TrainWindow], r_teacher: float,
                   rng: np.random.Generator) -> float:
        """Accumulate gradients over a batch; returns the mean window loss."""
        if not batch:
            raise InvalidInputError("empty batch")
        total = 0.0
        for window in batch:
            loss = nn.scale(self.window_loss(window, r_teacher, rng),
                            1.0 / len(batch))
            loss.backward()
            total += loss.item() * len(batch)
        return total / len(batch)

    def evaluate_loss(self, windows: list[TrainWindow]) -> float:
        with nn.no_grad():
            losses = [self.window_loss(w, 1.0, np.random.default_rng(0)).item()
                      for w in windows]
        return float(np.mean(losses))


def make_window(vel: np.ndarray, gt_xy: np.ndarray, offset: int, n_tokens: int,
                compress: int = 10) -> TrainWindow:
    """Cut a training window: velocities [offset, offset + 10n) and the pixel
    positions of token-frames 0..n (gt indices offset, offset+10, ...)."""
    raw_len = n_tokens * compress
    idx = offset + compress * np.arange(n_tokens + 1)
    return TrainWindow(vel[offset:offset + raw_len], gt_xy[idx])


@dataclass
class FitResult:
    history: list
    best_epoch: int
    best_val_loss: float


def fit(model: TwoBranchLocalizer, dataset, tcfg: TrainConfig,
        augment=None, log=None, start_epoch: int = 0,
        initial_val_history=None) -> FitResult:
    """Epoch loop with warm-up/plateau schedule, teacher-ratio decay, random
    window cropping and a by-trajectory validation hold-out.

    dataset is a sequence of (vel (N, 2), gt_xy (N + 1, 2)) pairs. The model
    ends up holding the best-validation parameters. `augment` optionally maps
    (vel_window, rng) to a perturbed window at sampling time.
    """
    if not dataset:
        raise InvalidInputError("empty dataset")
    cfg = model.cfg
    compress = cfg.compress
    usable = []
    for vel, gt in dataset:
        vel = np.asarray(vel, dtype=np.float64)
        gt = np.asarray(gt, dtype=np.float64)
        if len(gt) != len(vel) + 1:
            raise InvalidInputError("gt must have one more sample than vel")
        if len(vel) >= compress:
            usable.append((vel, gt))
    if not usable:
        raise InvalidInputError("no sequence long enough for one token")
    rng = np.random.default_rng(tcfg.seed)
    perm = rng.permutation(len(usable))
    n_val = max(1, int(round(len(usable) * tcfg.val_fraction)))
    if len(usable) == 1:
        train_set = val_set = [usable[0]]
    else:
        val_set = [usable[i] for i in perm[:n_val]]
        train_set = [usable[i] for i in perm[n_val:]]

    max_hist = min(tcfg.window_tokens, cfg.loc_history)

    def sample_window(pool, sample_rng) -> TrainWindow:
        vel, gt = pool[int(sample_rng.integers(len(pool)))]
        n_tok = min(max_hist, len(vel) // compress)
        offset = int(sample_rng.integers(0, len(vel) - compress * n_tok + 1))
        window = make_window(vel, gt, offset, n_tok, compress)
        if augment is not None:
            window = TrainWindow(augment(window.vel, sample_rng), window.targets)
        return window

    val_windows = [make_window(v, g, 0, min(max_hist, len(v) // compress),
                               compress) for v, g in val_set]
    steps = tcfg.steps_per_epoch or max(1, -(-len(train_set) // tcfg.batch))
    history = []
    best_val = math.inf
    best_epoch = -1
    best_values = model.params.copy_values()
    val_losses: list[float] = list(initial_val_history or [])
    for epoch in range(start_epoch, tcfg.epochs):
        lr = nn.lr_schedule(epoch, val_losses, base_lr=tcfg.base_lr,
                            warmup=tcfg.warmup,
                            plateau_patience=tcfg.plateau_patience,
                            factor=tcfg.lr_factor)
        r_teacher = teacher_ratio(epoch, tcfg.teacher_hold, tcfg.teacher_step,
                                  tcfg.teacher_period)
        epoch_loss = 0.0
        for _ in range(steps):
            batch = [sample_window(train_set, rng) for _ in range(tcfg.batch)]
            model.params.zero_grad()
            loss = model.train_step(batch, r_teacher, rng)
            if not math.isfinite(loss):
                model.params.load_values(best_values)
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}",
                                       checkpoint=best_values, history=history)
            nn.optimizer_step(model.params, lr, weight_decay=tcfg.weight_decay)
            epoch_loss += loss
        epoch_loss /= steps
        val_loss = model.evaluate_loss(val_windows)
        if not math.isfinite(val_loss):
            model.params.load_values(best_values)
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}",
                                   checkpoint=best_values, history=history)
        val_losses.append(val_loss)
        row = {"epoch": epoch, "lr": lr, "r_teacher": r_teacher,
               "train_loss": epoch_loss, "val_loss": val_loss}
        history.append(row)
        if log is not None:
            log(row)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_values = model.params.copy_values()
    model.params.load_values(best_values)
    return FitResult(history, best_epoch, best_val)


# ---------------------------------------------------------------------------
# Inference


@dataclass
class InferenceResult:
    frames: np.ndarray       # raw frame index of each estimated token-frame
    maps: np.ndarray         # (F, H, W) combined likelihoods
    trajectory: Trajectory   # argmax path at the estimated frames


def velocity_branch_infer(model: TwoBranchLocalizer, vel: np.ndarray,
                          window_tokens: int | None = None) -> InferenceResult:
    """Sliding-window localization using the velocity branch alone.

    Each token-frame estimate is taken from the window that ends at it, i.e.
    with the longest available history.
    """
    cfg = model.cfg
    vel = np.asarray(vel, dtype=np.float64)
    compress = cfg.compress
    n_tok = len(vel) // compress
    if n_tok < 1:
        raise WindowError("sequence shorter than one token")
    win = window_tokens or cfg.loc_history
    maps = np.zeros((n_tok, cfg.height, cfg.width))
    with nn.no_grad():
        for f in range(1, n_tok + 1):
            lo = max(0, f - win)
            out = velocity_branch_forward(model.params, cfg,
                                          vel[lo * compress:f * compress])
            maps[f - 1] = out.likelihoods()[-1]
    frames = compress * np.arange(1, n_tok + 1)
    xy = np.array([argmax_pixel(m) for m in maps], dtype=np.float64)
    return InferenceResult(frames, maps, Trajectory(frames, xy))


def autoregressive_infer(model: TwoBranchLocalizer, vel: np.ndarray,
                         init_maps: list[np.ndarray] | None = None) -> InferenceResult:
    """Roll the location branch over the sequence, averaging repeated estimates.

    Every frame accumulates up to `loc_history` estimates (one per history
    offset), combined with weights decreasing from 1.0 to 0.05 (earliest
    estimate weighted most) and renormalized. Without init_maps the first
    frame starts from a uniform likelihood.
    """
    cfg = model.cfg
    vel = np.asarray(vel, dtype=np.float64)
    compress = cfg.compress
    n_tok = len(vel) // compress
    if n_tok < 1:
        raise WindowError("sequence shorter than one token")
    if init_maps is None or len(init_maps) == 0:
        init_maps = [uniform_map(cfg.height, cfg.width)]
    n_init = len(init_maps)
    weights = inference_weights(cfg.loc_history)
    combined = {f: np.asarray(init_maps[f], dtype=np.float64)
                for f in range(n_init)}
    accum: dict[int, np.ndarray] = {}
    totals: dict[int, float] = {}
    counts: dict[int, int] = {}
    with nn.no_grad():
        for m in range(n_init, n_tok + 1):
            length = min(cfg.loc_history, m)
            start = m - length
            vb = velocity_branch_forward(model.params, cfg,
                                         vel[start * compress:m * compress])
            priors = np.stack([combined[f] for f in range(start, m)])
            logits = location_branch_forward(model.params, cfg, priors, vb.mid)
            probs = nn.softmax_lastdim(logits).data.reshape(
                length, cfg.height, cfg.width)
            for j in range(length):
                f = start + 1 + j
                if f < n_init:
                    continue
                k = counts.get(f, 0)
                if k >= len(weights):
                    continue
                w = weights[k]
                counts[f] = k + 1
                accum[f] = accum.get(f, 0.0) + w * probs[j]
                totals[f] = totals.get(f, 0.0) + w
                combined[f] = accum[f] / totals[f]
    frames = compress * np.arange(1, n_tok + 1)
    est = [combined[f] for f in range(1, n_tok + 1)]
    maps = np.stack(est) if est else np.zeros((0, cfg.height, cfg.width))
    xy = np.array([argmax_pixel(m) for m in maps], dtype=np.float64)
    return InferenceResult(frames, maps, Trajectory(frames, xy))
