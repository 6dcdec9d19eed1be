"""Sequence autoencoder with output feedback, plus a denoising variant.

A peephole-LSTM encoder folds a T x D feature sequence into its final
hidden state, the embedding z.  A decoder LSTM starts from a zero state,
receives z as its first input and its own previous output frame afterwards,
and emits one D-dim frame per step through a shared affine output layer.
Because z (width d) and the fed-back frames (width D) have different
widths, the decoder carries two input projection blocks: one applied at
step 1 only, one at every later step.  Both are trained.

Training minimizes the summed squared reconstruction error against the
uncorrupted input with plain per-sequence SGD; gradients flow through the
decoder's output-feedback edges, the z handoff, and the encoder.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import SegmentRecord, validate_frames
from .errors import CheckpointError, DataError, DimensionError, DivergenceError
from .lstm import (
    GATE_ORDER,
    LstmGrads,
    LstmParams,
    cell_backward,
    cell_forward,
    gate_rows,
    uniform_lstm_params,
    zero_state,
)

INIT_SCALE = 0.08
CHECKPOINT_VERSION = 1


@dataclass
class DecoderParams:
    """Decoder LSTM with two input projection blocks over a shared core.

    ``in_z`` (4H x d) projects the embedding at step 1; ``in_y`` (4H x D)
    projects the fed-back output frame at steps >= 2.  Recurrent weights,
    peepholes and biases are shared between the two step kinds.
    """

    in_z: np.ndarray
    in_y: np.ndarray
    W_h: np.ndarray
    b: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray

    def step_params(self, first: bool) -> LstmParams:
        return LstmParams(
            W_x=self.in_z if first else self.in_y,
            W_h=self.W_h,
            b=self.b,
            w_ci=self.w_ci,
            w_cf=self.w_cf,
            w_co=self.w_co,
        )


@dataclass
class DecoderGrads:
    in_z: np.ndarray
    in_y: np.ndarray
    W_h: np.ndarray
    b: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray

    @classmethod
    def zeros_like(cls, params: DecoderParams) -> "DecoderGrads":
        return cls(
            in_z=np.zeros_like(params.in_z),
            in_y=np.zeros_like(params.in_y),
            W_h=np.zeros_like(params.W_h),
            b=np.zeros_like(params.b),
            w_ci=np.zeros_like(params.w_ci),
            w_cf=np.zeros_like(params.w_cf),
            w_co=np.zeros_like(params.w_co),
        )

    def step_grads(self, first: bool) -> LstmGrads:
        # shares the underlying buffers, so accumulation lands in place
        return LstmGrads(
            W_x=self.in_z if first else self.in_y,
            W_h=self.W_h,
            b=self.b,
            w_ci=self.w_ci,
            w_cf=self.w_cf,
            w_co=self.w_co,
        )


@dataclass
class ModelParams:
    """All trainable weights of the autoencoder plus provenance fields."""

    input_dim: int
    hidden_dim: int
    encoder: LstmParams
    decoder: DecoderParams
    W_out: np.ndarray
    b_out: np.ndarray
    rng_seed: int
    epoch_count: int = 0

    def validate(self) -> None:
        d, h = self.input_dim, self.hidden_dim
        self.encoder.validate()
        if self.encoder.input_dim != d or self.encoder.hidden_dim != h:
            raise DimensionError("encoder shapes disagree with declared dimensions")
        if self.decoder.in_z.shape != (4 * h, h) or self.decoder.in_y.shape != (4 * h, d):
            raise DimensionError("decoder input block shapes disagree with declared dimensions")
        self.decoder.step_params(True).validate()
        self.decoder.step_params(False).validate()
        if self.W_out.shape != (d, h) or self.b_out.shape != (d,):
            raise DimensionError("output layer shapes disagree with declared dimensions")
        if not (np.isfinite(self.W_out).all() and np.isfinite(self.b_out).all()):
            raise DimensionError("output layer contains non-finite values")


@dataclass
class ModelGrads:
    encoder: LstmGrads
    decoder: DecoderGrads
    W_out: np.ndarray
    b_out: np.ndarray

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "ModelGrads":
        return cls(
            encoder=LstmGrads.zeros_like(params.encoder),
            decoder=DecoderGrads.zeros_like(params.decoder),
            W_out=np.zeros_like(params.W_out),
            b_out=np.zeros_like(params.b_out),
        )

    def arrays(self) -> list[np.ndarray]:
        e, d = self.encoder, self.decoder
        return [
            e.W_x, e.W_h, e.b, e.w_ci, e.w_cf, e.w_co,
            d.in_z, d.in_y, d.W_h, d.b, d.w_ci, d.w_cf, d.w_co,
            self.W_out, self.b_out,
        ]


def parameter_arrays(params: ModelParams) -> list[np.ndarray]:
    """The 15 unique weight arrays, in the same order as ModelGrads.arrays()."""
    e, d = params.encoder, params.decoder
    return [
        e.W_x, e.W_h, e.b, e.w_ci, e.w_cf, e.w_co,
        d.in_z, d.in_y, d.W_h, d.b, d.w_ci, d.w_cf, d.w_co,
        params.W_out, params.b_out,
    ]


def init_params(input_dim: int, hidden_dim: int, seed: int) -> ModelParams:
    """Seeded initialization: weights uniform in [-0.08, 0.08], biases zero."""
    if input_dim < 1 or hidden_dim < 1:
        raise ValueError("input_dim and hidden_dim must be >= 1")
    rng = np.random.default_rng(seed)
    h = hidden_dim

    def u(shape):
        return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

    encoder = uniform_lstm_params(rng, input_dim, hidden_dim, INIT_SCALE)
    decoder = DecoderParams(
        in_z=u((4 * h, h)),
        in_y=u((4 * h, input_dim)),
        W_h=u((4 * h, h)),
        b=np.zeros(4 * h),
        w_ci=u(h),
        w_cf=u(h),
        w_co=u(h),
    )
    return ModelParams(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        encoder=encoder,
        decoder=decoder,
        W_out=u((input_dim, hidden_dim)),
        b_out=np.zeros(input_dim),
        rng_seed=seed,
        epoch_count=0,
    )


def _encode_with_tape(params: ModelParams, x: np.ndarray):
    state = zero_state(params.hidden_dim)
    tape = []
    for t in range(x.shape[0]):
        state, entry = cell_forward(params.encoder, x[t], state)
        tape.append(entry)
    return state.h, tape


def _decode_with_tape(params: ModelParams, z: np.ndarray, length: int):
    state = zero_state(params.hidden_dim)
    tape = []
    hs = []
    ys = []
    inp = z
    for t in range(length):
        state, entry = cell_forward(params.decoder.step_params(t == 0), inp, state)
        tape.append(entry)
        hs.append(state.h)
        y = params.W_out @ state.h + params.b_out
        ys.append(y)
        inp = y
    return np.array(ys), hs, tape


def encode(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Run the encoder over x_1..x_T from a zero state; return h_T."""
    x = validate_frames(x)
    if x.shape[1] != params.input_dim:
        raise DimensionError(
            f"input width {x.shape[1]} does not match model input_dim {params.input_dim}"
        )
    z, _ = _encode_with_tape(params, x)
    return z


def decode(params: ModelParams, z: np.ndarray, length: int) -> np.ndarray:
    """Generate ``length`` output frames from z with output feedback."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (params.hidden_dim,):
        raise DimensionError(f"embedding shape {z.shape}, expected ({params.hidden_dim},)")
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    ys, _, _ = _decode_with_tape(params, z, length)
    return ys


def reconstruction_loss(x: np.ndarray, y: np.ndarray) -> float:
    """Sum over time of squared Euclidean frame errors (no averaging)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {y.shape}")
    return float(((x - y) ** 2).sum())


def corrupt_zero_mask(x: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Independently zero each element with probability p (fresh draws per call)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"corruption probability must be in [0, 1], got {p}")
    x = np.asarray(x, dtype=np.float64)
    keep = rng.random(x.shape) >= p
    return np.where(keep, x, 0.0)


def loss_and_gradients(
    params: ModelParams, x: np.ndarray, x_in: np.ndarray | None = None
) -> tuple[float, ModelGrads]:
    """Reconstruction loss of x and its exact gradient for every parameter.

    ``x_in`` is the (possibly corrupted) sequence fed to the encoder; the
    loss target is always ``x``.  Backpropagation covers the decoder's
    output-feedback edges y_{t-1} -> y_t, the z handoff, and the encoder.
    """
    x = np.asarray(x, dtype=np.float64)
    if x_in is None:
        x_in = x
    else:
        x_in = np.asarray(x_in, dtype=np.float64)
    z, enc_tape = _encode_with_tape(params, x_in)
    length = x.shape[0]
    ys, hs, dec_tape = _decode_with_tape(params, z, length)
    loss = reconstruction_loss(x, ys)

    grads = ModelGrads.zeros_like(params)
    h = params.hidden_dim
    dh_rec = np.zeros(h)
    dc_rec = np.zeros(h)
    d_input = np.zeros(params.input_dim)  # gradient flowing into y_t via the feedback edge
    for t in range(length - 1, -1, -1):
        dy = 2.0 * (ys[t] - x[t])
        if t < length - 1:
            dy = dy + d_input
        grads.W_out += np.outer(dy, hs[t])
        grads.b_out += dy
        dh = params.W_out.T @ dy + dh_rec
        first = t == 0
        d_input, (dh_rec, dc_rec) = cell_backward(
            params.decoder.step_params(first),
            dec_tape[t],
            dh,
            dc_rec,
            grads.decoder.step_grads(first),
        )
    dz = d_input  # step-1 input gradient: the z handoff into the encoder

    dh = dz
    dc = np.zeros(h)
    for t in range(x_in.shape[0] - 1, -1, -1):
        _, (dh, dc) = cell_backward(params.encoder, enc_tape[t], dh, dc, grads.encoder)
    return loss, grads


def global_grad_norm(grads: ModelGrads) -> float:
    return math.sqrt(sum(float((g * g).sum()) for g in grads.arrays()))


@dataclass
class TrainConfig:
    """Hyperparameters for one training run (seed is mandatory)."""

    seed: int
    lr: float = 0.3
    epochs: int = 500
    denoise_p: float = 0.0
    clip_norm: float | None = 5.0
    loss_log_path: str | Path | None = None


def train(
    params: ModelParams, records: Sequence[SegmentRecord], config: TrainConfig
) -> tuple[ModelParams, list[float]]:
    """SGD without momentum, one update per sequence, seeded shuffling.

    Each presentation corrupts the input with ``denoise_p`` zero-masking
    (inert at 0.0) while the loss target stays uncorrupted.  If
    ``clip_norm`` is set, the whole gradient is rescaled so its global L2
    norm is at most that value before the update.  Returns the (mutated)
    params and the per-epoch mean loss log.
    """
    records = list(records)
    if not records:
        raise DataError("training requires a non-empty train split")
    for rec in records:
        if rec.dim != params.input_dim:
            raise DimensionError(
                f"record '{rec.id}' has width {rec.dim}, model expects {params.input_dim}"
            )
    if config.lr < 0:
        raise ValueError(f"lr must be >= 0, got {config.lr}")
    if config.epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {config.epochs}")
    if not 0.0 <= config.denoise_p <= 1.0:
        raise ValueError(f"denoise_p must be in [0, 1], got {config.denoise_p}")
    if config.clip_norm is not None and config.clip_norm <= 0:
        raise ValueError(f"clip_norm must be positive or None, got {config.clip_norm}")

    rng = np.random.default_rng(config.seed)
    arrays = parameter_arrays(params)
    losses: list[float] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(records))
        total = 0.0
        for k in order:
            rec = records[int(k)]
            x = rec.features
            x_in = corrupt_zero_mask(x, config.denoise_p, rng)
            loss, grads = loss_and_gradients(params, x, x_in)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, record '{rec.id}'"
                )
            total += loss
            gr = grads.arrays()
            if config.clip_norm is not None:
                norm = global_grad_norm(grads)
                if norm > config.clip_norm:
                    scale = config.clip_norm / norm
                    for g in gr:
                        g *= scale
            for p_arr, g_arr in zip(arrays, gr):
                p_arr -= config.lr * g_arr
        params.epoch_count += 1
        losses.append(total / len(records))
    if config.loss_log_path is not None:
        write_loss_log(losses, config.loss_log_path)
    return params, losses


def write_loss_log(losses: Sequence[float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for epoch, loss in enumerate(losses, start=1):
            fh.write(f"{epoch},{repr(float(loss))}\n")


def named_parameter_blocks(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Canonical (name, view) pairs for serialization, per-gate granularity."""
    blocks: list[tuple[str, np.ndarray]] = []
    enc, dec = params.encoder, params.decoder
    for gate in GATE_ORDER:
        blocks.append((f"encoder.W_x{gate}", gate_rows(enc.W_x, gate)))
    for gate in GATE_ORDER:
        blocks.append((f"encoder.W_h{gate}", gate_rows(enc.W_h, gate)))
    blocks += [("encoder.w_ci", enc.w_ci), ("encoder.w_cf", enc.w_cf), ("encoder.w_co", enc.w_co)]
    for gate in GATE_ORDER:
        blocks.append((f"encoder.b_{gate}", gate_rows(enc.b, gate)))
    for gate in GATE_ORDER:
        blocks.append((f"decoder.W_z.W_x{gate}", gate_rows(dec.in_z, gate)))
    for gate in GATE_ORDER:
        blocks.append((f"decoder.W_y.W_x{gate}", gate_rows(dec.in_y, gate)))
    for gate in GATE_ORDER:
        blocks.append((f"decoder.W_h{gate}", gate_rows(dec.W_h, gate)))
    blocks += [("decoder.w_ci", dec.w_ci), ("decoder.w_cf", dec.w_cf), ("decoder.w_co", dec.w_co)]
    for gate in GATE_ORDER:
        blocks.append((f"decoder.b_{gate}", gate_rows(dec.b, gate)))
    blocks += [("output.W", params.W_out), ("output.b", params.b_out)]
    return blocks


def save_checkpoint(
    params: ModelParams, path: str | Path, train_meta: dict | None = None
) -> None:
    """Write a versioned JSON checkpoint with full float round-trip precision."""
    payload: dict = {
        "version": CHECKPOINT_VERSION,
        "input_dim": params.input_dim,
        "hidden_dim": params.hidden_dim,
        "seed": params.rng_seed,
        "epochs": params.epoch_count,
    }
    if train_meta is not None:
        payload["train"] = train_meta
    payload["params"] = {name: arr.tolist() for name, arr in named_parameter_blocks(params)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _checkpoint_array(blob: dict, name: str) -> np.ndarray:
    if name not in blob:
        raise CheckpointError(f"checkpoint is missing parameter '{name}'")
    try:
        arr = np.asarray(blob[name], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise CheckpointError(f"parameter '{name}' is not numeric") from exc
    return arr


def _stack_gate_blocks(blob: dict, prefix: str) -> np.ndarray:
    arrs = [_checkpoint_array(blob, f"{prefix}{g}") for g in GATE_ORDER]
    try:
        return np.concatenate(arrs)
    except ValueError as exc:
        raise CheckpointError(f"gate blocks '{prefix}*' have inconsistent shapes") from exc


def load_checkpoint(path: str | Path) -> ModelParams:
    """Read a checkpoint written by save_checkpoint; exact round-trip."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint file") from exc
    if not isinstance(payload, dict):
        raise CheckpointError(f"{path}: malformed checkpoint file")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {payload.get('version')!r}"
        )
    try:
        input_dim = int(payload["input_dim"])
        hidden_dim = int(payload["hidden_dim"])
        seed = int(payload["seed"])
        epochs = int(payload["epochs"])
        blob = payload["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: missing or invalid header field") from exc
    if not isinstance(blob, dict):
        raise CheckpointError(f"{path}: 'params' must be an object")

    encoder = LstmParams(
        W_x=_stack_gate_blocks(blob, "encoder.W_x"),
        W_h=_stack_gate_blocks(blob, "encoder.W_h"),
        b=_stack_gate_blocks(blob, "encoder.b_"),
        w_ci=_checkpoint_array(blob, "encoder.w_ci"),
        w_cf=_checkpoint_array(blob, "encoder.w_cf"),
        w_co=_checkpoint_array(blob, "encoder.w_co"),
    )
    decoder = DecoderParams(
        in_z=_stack_gate_blocks(blob, "decoder.W_z.W_x"),
        in_y=_stack_gate_blocks(blob, "decoder.W_y.W_x"),
        W_h=_stack_gate_blocks(blob, "decoder.W_h"),
        b=_stack_gate_blocks(blob, "decoder.b_"),
        w_ci=_checkpoint_array(blob, "decoder.w_ci"),
        w_cf=_checkpoint_array(blob, "decoder.w_cf"),
        w_co=_checkpoint_array(blob, "decoder.w_co"),
    )
    params = ModelParams(
        input_dim=input_dim,
        hidden_dim=hidden_dim,
        encoder=encoder,
        decoder=decoder,
        W_out=_checkpoint_array(blob, "output.W"),
        b_out=_checkpoint_array(blob, "output.b"),
        rng_seed=seed,
        epoch_count=epochs,
    )
    try:
        params.validate()
    except DimensionError as exc:
        raise CheckpointError(f"{path}: inconsistent shapes: {exc}") from exc
    return params
