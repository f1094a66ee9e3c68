"""Losses, the periodic L1-weight schedule, the alternating optimization loop,
checkpoints and step telemetry.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from .config import ExperimentConfig, LambdaSchedule, OptimizerConfig
from .core import ModelConfig, Sample, onehot_encode
from .errors import ConfigMismatch, EmptyDataset, FormatError, NonFiniteLoss
from .ingestion import rasterize_pose
from .metrics import LUMA_WEIGHTS
from .models import (
    Networks, build_networks, discriminator_condition, frame_tensor, generator_inputs, logits_to_onehot,
)

log = logging.getLogger(__name__)

TELEMETRY_COLUMNS = ("step", "epoch_progress", "loss_d", "loss_g_adv", "loss_g_l1", "lambda", "sigma")

__all__ = [
    "LambdaSchedule", "lambda_at", "lsgan_d_loss", "lsgan_g_loss", "l1_loss", "generator_objective",
    "TrainState", "train_step", "run_training", "save_checkpoint", "load_checkpoint",
]


# -- schedule ----------------------------------------------------------------

def lambda_at(s: LambdaSchedule, epoch_progress: float) -> float:
    """L1 weight at a (fractional) epoch."""
    if s.mode == "static":
        return float(s.static_value) if s.static_value is not None else s.i + s.j / 2.0
    e = float(epoch_progress)
    if e < 0:
        raise ValueError(f"epoch_progress must be >= 0, got {e}")
    if s.continuation == "restart":
        e = math.fmod(e, s.half_period)
    return s.i + s.j * (math.cos(math.pi * e / s.half_period) + 1.0) / 2.0


# -- losses ------------------------------------------------------------------

def lsgan_d_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """Least-squares discriminator loss with real target 1, fake target 0."""
    real_scores, fake_scores = torch.as_tensor(real_scores), torch.as_tensor(fake_scores)
    return 0.5 * torch.mean((real_scores - 1) ** 2) + 0.5 * torch.mean(fake_scores ** 2)


def lsgan_g_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    fake_scores = torch.as_tensor(fake_scores)
    return 0.5 * torch.mean((fake_scores - 1) ** 2)


def l1_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return torch.mean(torch.abs(torch.as_tensor(generated) - torch.as_tensor(target)))


def generator_objective(fake_scores, generated, target, lam: float) -> torch.Tensor:
    return lsgan_g_loss(fake_scores) + lam * l1_loss(generated, target)


def _finite(term: str, value: torch.Tensor) -> None:
    v = float(value.detach())
    if not math.isfinite(v):
        raise NonFiniteLoss(term, v)


# -- state -------------------------------------------------------------------

@dataclass
class TrainState:
    step: int
    steps_per_epoch: int
    optimizers: Dict[str, torch.optim.Optimizer]
    seed: int = 0
    telemetry: List[dict] = field(default_factory=list)

    @property
    def epoch_progress(self) -> float:
        return self.step / self.steps_per_epoch


def make_optimizers(nets: Networks, opt: OptimizerConfig) -> Dict[str, torch.optim.Optimizer]:
    """Adam for every trainable network; the parser is frozen and gets none."""
    return {
        name: torch.optim.Adam(net.parameters(), lr=opt.lr, betas=opt.betas)
        for name, net in nets.named() if name != "parser"
    }


def freeze(net: torch.nn.Module) -> None:
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)


# -- batch preparation -------------------------------------------------------

def sample_tensors(sample: Sample, config: ModelConfig) -> dict:
    """Network-facing tensors of one sample (batch dimension of 1)."""
    c = config.num_classes
    out = {
        "frame": frame_tensor(sample.input_frame),
        "initial": torch.from_numpy(onehot_encode(sample.initial_parsing, c)).unsqueeze(0),
        "pose": torch.from_numpy(rasterize_pose(sample.target_pose, config.image_size).pixels).permute(2, 0, 1).unsqueeze(0),
    }
    if sample.target_frame is not None:
        out["target"] = frame_tensor(sample.target_frame)
    if sample.target_parsing is not None:
        labels = torch.from_numpy(sample.target_parsing.labels.astype(np.int64)).unsqueeze(0)
        out["target_labels"] = labels
        out["target_onehot"] = F.one_hot(labels, c).permute(0, 3, 1, 2).float()
    return out


def collate(items: Sequence[dict]) -> dict:
    keys = set.intersection(*(set(i) for i in items))
    return {k: torch.cat([i[k] for i in items], dim=0) for k in keys}


def batch_sigma(generated: torch.Tensor) -> float:
    """Mean per-image standard deviation of 8-bit luma."""
    px = (generated.detach().double() + 1.0) * 127.5
    y = torch.einsum("nchw,c->nhw", px, torch.as_tensor(LUMA_WEIGHTS))
    return float(y.flatten(1).std(dim=1, unbiased=False).mean())


# -- one step ----------------------------------------------------------------

def predict_parsing(nets: Networks, batch: dict) -> torch.Tensor:
    with torch.no_grad():
        return logits_to_onehot(nets.predictor(torch.cat([batch["initial"], batch["pose"]], dim=1)))


def train_step(state: TrainState, batch: dict, nets: Networks, schedule: LambdaSchedule,
               joint: bool = False) -> dict:
    """One D update followed by one G update (and one B update when ``joint``).

    ``batch`` is a :func:`collate`-d dict. When ``joint`` is False the batch
    should carry ``predicted`` one-hots from a frozen predictor; they are
    computed on the fly otherwise.
    """
    cfg = nets.config
    opt = state.optimizers
    frame, initial, pose, target = batch["frame"], batch["initial"], batch["pose"], batch["target"]
    lam = lambda_at(schedule, state.epoch_progress)
    row = {"step": state.step, "epoch_progress": state.epoch_progress, "lambda": lam}

    if joint:
        nets.predictor.train()
        logits = nets.predictor(torch.cat([initial, pose], dim=1))
        loss_b = F.cross_entropy(logits, batch["target_labels"])
        _finite("loss_b", loss_b)
        opt["predictor"].zero_grad(set_to_none=True)
        loss_b.backward()
        opt["predictor"].step()
        predicted = logits_to_onehot(logits)
        row["loss_b"] = loss_b.item()
    else:
        predicted = batch["predicted"] if "predicted" in batch else predict_parsing(nets, batch)

    g_in = generator_inputs(cfg, frame, initial, predicted, pose)
    cond_fake = discriminator_condition(cfg, frame, initial, predicted, pose)
    if cfg.d_real_parsing == "groundtruth" and "target_onehot" in batch:
        cond_real = discriminator_condition(cfg, frame, initial, batch["target_onehot"], pose)
    else:
        cond_real = cond_fake

    nets.generator.train()
    nets.discriminator.train()
    fake = nets.generator(*g_in)

    # discriminator: real vs detached fake
    real_scores = nets.discriminator(torch.cat([cond_real, target], dim=1))
    fake_scores = nets.discriminator(torch.cat([cond_fake, fake.detach()], dim=1))
    loss_d = lsgan_d_loss(real_scores, fake_scores)
    _finite("loss_d", loss_d)
    opt["discriminator"].zero_grad(set_to_none=True)
    loss_d.backward()
    opt["discriminator"].step()

    # generator: fool the updated discriminator, stay close in L1
    for p in nets.discriminator.parameters():
        p.requires_grad_(False)
    try:
        fake_scores = nets.discriminator(torch.cat([cond_fake, fake], dim=1))
        loss_adv = lsgan_g_loss(fake_scores)
        loss_l1 = l1_loss(fake, target)
        _finite("loss_g_adv", loss_adv)
        _finite("loss_g_l1", loss_l1)
        opt["generator"].zero_grad(set_to_none=True)
        (loss_adv + lam * loss_l1).backward()
        opt["generator"].step()
    finally:
        for p in nets.discriminator.parameters():
            p.requires_grad_(True)

    row.update(loss_d=loss_d.item(), loss_g_adv=loss_adv.item(), loss_g_l1=loss_l1.item(), sigma=batch_sigma(fake))
    state.telemetry.append(row)
    state.step += 1
    return row


# -- supervised stages ---------------------------------------------------------

def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for k in range(0, n, batch_size):
        yield order[k:k + batch_size]


def train_parser(net: torch.nn.Module, frames, parsings, epochs: int, batch_size: int = 4,
                 opt: OptimizerConfig = OptimizerConfig(), seed: int = 0) -> List[float]:
    """Toy supervised training of the semantic parser on exact labels.

    Returns mean cross-entropy per epoch. The caller freezes the parser
    afterwards.
    """
    if not frames:
        raise EmptyDataset("no labeled frames for parser training")
    x = torch.cat([frame_tensor(f) for f in frames])
    y = torch.from_numpy(np.stack([p.labels for p in parsings]).astype(np.int64))
    return _supervised(net, x, y, epochs, batch_size, opt, seed)


def _supervised(net, x, y, epochs, batch_size, opt, seed) -> List[float]:
    optimizer = torch.optim.Adam(net.parameters(), lr=opt.lr, betas=opt.betas)
    rng = np.random.default_rng(seed)
    history = []
    net.train()
    for _ in range(epochs):
        losses = []
        for idx in _batches(len(x), batch_size, rng):
            loss = F.cross_entropy(net(x[idx]), y[idx])
            _finite("loss_parsing", loss)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
    net.eval()
    return history


def train_predictor(nets: Networks, items: Sequence[dict], epochs: int, batch_size: int,
                    optimizer: torch.optim.Optimizer, seed: int = 0) -> List[float]:
    """Per-pixel cross-entropy training of the parsing predictor."""
    rng = np.random.default_rng(seed)
    history = []
    nets.predictor.train()
    for _ in range(epochs):
        losses = []
        for idx in _batches(len(items), batch_size, rng):
            batch = collate([items[i] for i in idx])
            logits = nets.predictor(torch.cat([batch["initial"], batch["pose"]], dim=1))
            loss = F.cross_entropy(logits, batch["target_labels"])
            _finite("loss_b", loss)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
    nets.predictor.eval()
    return history


# -- full run ------------------------------------------------------------------

@dataclass
class TrainResult:
    state: TrainState
    nets: Networks
    predictor_history: List[float]


def run_training(config: ExperimentConfig, dataset: Sequence[Sample], epochs: int,
                 nets: Optional[Networks] = None, out_dir: Union[str, Path, None] = None,
                 on_epoch_end: Optional[Callable[[int, TrainState, Networks], None]] = None) -> TrainResult:
    """Pretrain the parsing predictor, then run ``epochs`` of GAN training.

    With ``training.joint`` the predictor trains inside every GAN step
    instead. When ``out_dir`` is given, ``telemetry.csv`` and a checkpoint per
    epoch (``epoch_XXXX``) plus ``final`` are written there. Deterministic for
    a fixed ``training.seed`` in single-process mode.
    """
    if not dataset:
        raise EmptyDataset("training dataset is empty")
    missing = [s.frame_id for s in dataset if s.target_frame is None or s.target_parsing is None]
    if missing:
        raise EmptyDataset(f"{len(missing)} samples lack a target frame or target parsing, e.g. {missing[0]!r}")
    tc = config.training
    torch.manual_seed(tc.seed)
    if nets is None:
        nets = build_networks(config.model)
    freeze(nets.parser)
    items = [sample_tensors(s, config.model) for s in dataset]
    steps_per_epoch = math.ceil(len(items) / tc.batch_size)
    state = TrainState(0, steps_per_epoch, make_optimizers(nets, config.optimizer), seed=tc.seed)

    history: List[float] = []
    if not tc.joint:
        if tc.predictor_epochs:
            history = train_predictor(nets, items, tc.predictor_epochs, tc.batch_size,
                                      state.optimizers["predictor"], seed=tc.seed)
        nets.predictor.eval()
        for item in items:
            item["predicted"] = predict_parsing(nets, item)

    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(tc.seed)
    for epoch in range(epochs):
        for idx in _batches(len(items), tc.batch_size, rng):
            row = train_step(state, collate([items[i] for i in idx]), nets, config.schedule, joint=tc.joint)
            log.debug("step %d %s", row["step"], row)
        if out is not None:
            save_checkpoint(state, nets, out / f"epoch_{epoch + 1:04d}", config)
        if on_epoch_end is not None:
            on_epoch_end(epoch, state, nets)
    if out is not None:
        write_telemetry(state.telemetry, out / "telemetry.csv")
        save_checkpoint(state, nets, out / "final", config)
    return TrainResult(state, nets, history)


def write_telemetry(rows: Sequence[dict], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TELEMETRY_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def read_telemetry(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        columns = reader.fieldnames or []
    return {c: np.array([float(r[c]) for r in rows]) for c in columns}


# -- checkpoints ---------------------------------------------------------------
#
# <name>.bin is a sequence of records, all integers little-endian:
#   u32 name_len | name (utf-8) | u8 dtype_code | u32 ndim | u32 shape[ndim] | float32 data
# dtype_code 0 is float32, the only code written.

FORMAT_VERSION = 1
DTYPE_FLOAT32 = 0


def write_blob(tensors: Dict[str, torch.Tensor], path: Union[str, Path]) -> None:
    with open(path, "wb") as fh:
        for name, t in tensors.items():
            t = t.detach().cpu()
            if t.dtype != torch.float32:
                raise FormatError(f"{name}: only float32 tensors are serializable, got {t.dtype}")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BI", DTYPE_FLOAT32, t.dim()))
            fh.write(struct.pack(f"<{t.dim()}I", *t.shape))
            fh.write(t.contiguous().numpy().astype("<f4", copy=False).tobytes())


def read_blob(path: Union[str, Path]) -> Dict[str, torch.Tensor]:
    data = Path(path).read_bytes()
    out, pos = {}, 0
    try:
        while pos < len(data):
            (n,) = struct.unpack_from("<I", data, pos)
            pos += 4
            name = data[pos:pos + n].decode("utf-8")
            pos += n
            code, ndim = struct.unpack_from("<BI", data, pos)
            pos += 5
            if code != DTYPE_FLOAT32:
                raise FormatError(f"{path}: record {name!r} has unknown dtype code {code}")
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            count = int(np.prod(shape, dtype=np.int64))
            arr = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape)
            pos += 4 * count
            out[name] = torch.from_numpy(arr.astype(np.float32, copy=True))
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise FormatError(f"{path}: truncated or corrupt weight blob") from exc
    return out


def _optimizer_tensors(optimizer: torch.optim.Optimizer) -> Dict[str, torch.Tensor]:
    flat = {}
    for idx, entries in optimizer.state_dict()["state"].items():
        for key, value in entries.items():
            flat[f"state.{idx}.{key}"] = torch.as_tensor(value, dtype=torch.float32)
    return flat


def save_checkpoint(state: TrainState, nets: Networks, path: Union[str, Path],
                    config: Optional[ExperimentConfig] = None, metrics: Optional[dict] = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, net in nets.named():
        write_blob(dict(net.state_dict()), path / f"{name}.bin")
    groups = {}
    for name, optimizer in state.optimizers.items():
        write_blob(_optimizer_tensors(optimizer), path / f"{name}_optimizer.bin")
        groups[name] = [{k: v for k, v in g.items()} for g in optimizer.state_dict()["param_groups"]]
    manifest = {
        "format_version": FORMAT_VERSION,
        "model": nets.config.to_dict(),
        "step": state.step,
        "steps_per_epoch": state.steps_per_epoch,
        "epoch_progress": state.epoch_progress,
        "seed": state.seed,
        "experiment": config.to_dict() if config is not None else None,
        "optimizer_param_groups": groups,
        "metrics": metrics or {},
        "networks": [name for name, _ in nets.named()],
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def read_manifest(path: Union[str, Path]) -> dict:
    p = Path(path) / "manifest.json"
    try:
        return json.loads(p.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{p}: unreadable checkpoint manifest: {exc}") from exc


def load_checkpoint(path: Union[str, Path], expected: Optional[ModelConfig] = None):
    """Rebuild ``(TrainState, Networks)`` from a checkpoint directory.

    ``expected``, when given, must match the stored model config field by
    field; the first differing field is reported via ConfigMismatch.
    """
    path = Path(path)
    manifest = read_manifest(path)
    stored = manifest["model"]
    if expected is not None:
        for key, value in expected.to_dict().items():
            if stored.get(key) != value:
                raise ConfigMismatch(f"model.{key}", value, stored.get(key))
    config = ModelConfig(**stored)
    nets = build_networks(config)
    for name, net in nets.named():
        weights = read_blob(path / f"{name}.bin")
        try:
            net.load_state_dict(weights, strict=True)
        except RuntimeError as exc:
            raise FormatError(f"{path / (name + '.bin')}: {exc}") from exc
    freeze(nets.parser)
    optimizers = {}
    for name, groups in manifest.get("optimizer_param_groups", {}).items():
        net = dict(nets.named())[name]
        first = groups[0]
        optimizer = torch.optim.Adam(net.parameters(), lr=first["lr"], betas=tuple(first["betas"]))
        flat = read_blob(path / f"{name}_optimizer.bin")
        nested: Dict[int, dict] = {}
        for key, value in flat.items():
            _, idx, field_name = key.split(".", 2)
            nested.setdefault(int(idx), {})[field_name] = value
        for g in groups:
            g["betas"] = tuple(g["betas"])
        optimizer.load_state_dict({"state": nested, "param_groups": groups})
        optimizers[name] = optimizer
    state = TrainState(manifest["step"], manifest["steps_per_epoch"], optimizers, seed=manifest.get("seed", 0))
    return state, nets
