"""On-disk formats: epoch tensors, trained models and run configuration.

Tensor file (all integers little-endian)::

    offset  size  field
    0       4     magic b"EEGT"
    4       4     uint32 format version (1)
    8       4     uint32 header length H in bytes
    12      H     UTF-8 JSON header
    12+H    4*N   float32 payload, row-major (stimulus, channel, sample, block)

The header carries ``dims`` ({n_stimuli, n_channels, n_samples, n_blocks}),
``fs``, ``frequencies``, ``phases``, ``channel_names`` and ``subject_id``;
extra keys are preserved.

Model file::

    0       4     magic b"EEGM"
    4       4     uint32 container version (1)
    8       8     uint64 payload length P
    16      32    SHA-256 of the payload
    48      P     payload: an uncompressed ``.npz`` archive (no pickles)
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
import hashlib
import io
import json
import os
from pathlib import Path
import struct
import tempfile

import numpy as np
from numpy import ndarray

from .selection import SelectionConfig, SimilarityReport
from .signal import FilterBankSpec
from .transfer import ALGORITHMS, LatentWeights, StimulusModel, TrainedModel

TENSOR_MAGIC = b"EEGT"
TENSOR_VERSION = 1
MODEL_MAGIC = b"EEGM"
MODEL_VERSION = 1
DIM_KEYS = ("n_stimuli", "n_channels", "n_samples", "n_blocks")
DEFAULT_CHANNELS = ("Pz", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2")


class FormatError(ValueError):
    pass


class VersionError(FormatError):
    pass


class ChecksumError(FormatError):
    pass


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temp file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- tensors ---------------------------------------------------------------

def _check_header_dims(header: dict) -> tuple[int, ...]:
    dims = header.get("dims")
    if not isinstance(dims, dict) or any(k not in dims for k in DIM_KEYS):
        raise FormatError(f"header 'dims' must define {DIM_KEYS}")
    shape = tuple(int(dims[k]) for k in DIM_KEYS)
    if any(d <= 0 for d in shape):
        raise FormatError(f"header dims must be positive, got {dict(zip(DIM_KEYS, shape))}")
    return shape


def tensor_bytes(tensor, header: dict) -> bytes:
    tensor = np.asarray(tensor)
    header = dict(header)
    if "dims" not in header:
        if tensor.ndim != 4:
            raise FormatError(f"tensor must be 4-D, got shape {tensor.shape}")
        header["dims"] = dict(zip(DIM_KEYS, (int(d) for d in tensor.shape)))
    shape = _check_header_dims(header)
    if tensor.size != int(np.prod(shape)):
        raise FormatError(
            f"header dims {shape} hold {int(np.prod(shape))} values, tensor has {tensor.size}")
    if tensor.shape != shape:
        raise FormatError(f"tensor shape {tensor.shape} does not match header dims {shape}")
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    return TENSOR_MAGIC + struct.pack("<II", TENSOR_VERSION, len(head)) + head + payload


def write_tensor(path, tensor, header: dict | None = None) -> None:
    """Validate and write an epoch tensor; nothing is written on error."""
    atomic_write(path, tensor_bytes(tensor, header or {}))


def select_channels(tensor: ndarray, header: dict, n_channels: int | None = None,
                    channel_order=None) -> tuple[ndarray, dict]:
    """Keep the first ``n_channels`` names of ``channel_order``, in that order."""
    if n_channels is None and channel_order is None:
        return tensor, header
    order = list(channel_order or DEFAULT_CHANNELS)
    if n_channels is not None:
        if not 1 <= n_channels <= len(order):
            raise ValueError(f"n_channels must lie in [1, {len(order)}], got {n_channels}")
        order = order[:n_channels]
    names = header.get("channel_names")
    if not names:
        raise FormatError("tensor header has no channel_names; cannot select channels by name")
    missing = [c for c in order if c not in names]
    if missing:
        raise FormatError(f"requested channel(s) absent from tensor: {missing}")
    idx = [names.index(c) for c in order]
    header = dict(header)
    header["channel_names"] = order
    header["dims"] = dict(header["dims"], n_channels=len(idx))
    return tensor[:, idx], header


def read_tensor(path, n_channels: int | None = None,
                channel_order=None) -> tuple[ndarray, dict]:
    """Read a tensor file as float64 plus its header.

    With ``n_channels``/``channel_order`` the channels are subset and
    reordered by name; stimuli and blocks are never reordered.
    """
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != TENSOR_MAGIC:
        raise FormatError(f"{path}: not a tensor file (bad magic {raw[:4]!r})")
    version, head_len = struct.unpack_from("<II", raw, 4)
    if version != TENSOR_VERSION:
        raise VersionError(f"{path}: unsupported tensor format version {version}")
    if len(raw) < 12 + head_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12:12 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt JSON header: {exc}") from None
    shape = _check_header_dims(header)
    expected = int(np.prod(shape)) * 4
    actual = len(raw) - 12 - head_len
    if actual != expected:
        raise FormatError(
            f"{path}: payload size mismatch: expected {expected} bytes, found {actual}")
    tensor = np.frombuffer(raw, dtype="<f4", offset=12 + head_len).reshape(shape)
    tensor = tensor.astype(np.float64)
    return select_channels(tensor, header, n_channels, channel_order)


# -- models ----------------------------------------------------------------

def _model_arrays(model: TrainedModel) -> tuple[dict, dict]:
    arrays: dict[str, ndarray] = {}
    cells = []
    for m, row in enumerate(model.per_subband):
        for i, sm in enumerate(row):
            key = f"{m}_{i}"
            arrays[f"wt_{key}"] = sm.target_filter
            arrays[f"xt_{key}"] = sm.target_template
            arrays[f"ys_{key}"] = sm.source_template
            cell = {"m": m, "i": i, "source_ids": list(sm.source_ids),
                    "stimulus_index": sm.stimulus_index, "latent": sm.latent is not None}
            if sm.latent is not None:
                arrays[f"wgs_{key}"] = sm.latent.w_gs
                arrays[f"wgt_{key}"] = sm.latent.w_gt
                cell["correlation"] = sm.latent.correlation
            if sm.report is not None:
                arrays[f"raw_{key}"] = sm.report.raw
                arrays[f"norm_{key}"] = sm.report.normalized
                cell["report"] = {"selected": list(sm.report.selected),
                                  "triggered": sm.report.triggered}
            cells.append(cell)
    meta = {
        "n_subbands": len(model.per_subband),
        "n_stimuli": model.n_stimuli,
        "bank": model.bank.to_dict(),
        "fs": model.fs,
        "n_channels": model.n_channels,
        "n_samples": model.n_samples,
        "algorithm": model.algorithm,
        "zero_phase": model.zero_phase,
        "selection": asdict(model.selection) if model.selection is not None else None,
        "config": model.config,
        "cells": cells,
    }
    return meta, arrays


def model_bytes(model: TrainedModel) -> bytes:
    meta, arrays = _model_arrays(model)
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), np.uint8),
             **arrays)
    payload = buf.getvalue()
    return (MODEL_MAGIC + struct.pack("<IQ", MODEL_VERSION, len(payload))
            + hashlib.sha256(payload).digest() + payload)


def save_model(path, model: TrainedModel) -> None:
    atomic_write(path, model_bytes(model))


def model_from_bytes(raw: bytes, source: str = "<bytes>") -> TrainedModel:
    if len(raw) < 4 or raw[:4] != MODEL_MAGIC:
        raise FormatError(f"{source}: not a model file (bad magic {raw[:4]!r})")
    if len(raw) < 48:
        raise ChecksumError(f"{source}: checksum failure: file truncated inside the preamble")
    version, length = struct.unpack_from("<IQ", raw, 4)
    if version != MODEL_VERSION:
        raise VersionError(f"{source}: unsupported model container version {version}")
    digest = raw[16:48]
    payload = raw[48:]
    if len(payload) != length or hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(
            f"{source}: checksum failure (declared {length} payload bytes, found {len(payload)})")
    with np.load(io.BytesIO(payload), allow_pickle=False) as npz:
        arrays = {k: npz[k] for k in npz.files}
    meta = json.loads(arrays.pop("__meta__").tobytes().decode())

    grid: list[list[StimulusModel | None]] = [[None] * meta["n_stimuli"]
                                              for _ in range(meta["n_subbands"])]
    for cell in meta["cells"]:
        key = f"{cell['m']}_{cell['i']}"
        latent = None
        if cell["latent"]:
            latent = LatentWeights(arrays[f"wgs_{key}"], arrays[f"wgt_{key}"],
                                   cell["correlation"])
        report = None
        if "report" in cell:
            report = SimilarityReport(arrays[f"raw_{key}"], arrays[f"norm_{key}"],
                                      tuple(cell["report"]["selected"]),
                                      cell["report"]["triggered"])
        grid[cell["m"]][cell["i"]] = StimulusModel(
            arrays[f"wt_{key}"], arrays[f"xt_{key}"], arrays[f"ys_{key}"], latent,
            tuple(cell["source_ids"]), report, cell["stimulus_index"])
    selection = SelectionConfig(**meta["selection"]) if meta["selection"] else None
    return TrainedModel(grid, FilterBankSpec.from_dict(meta["bank"]), meta["fs"],
                        meta["n_channels"], meta["n_samples"], meta["algorithm"],
                        meta["zero_phase"], selection, meta["config"])


def load_model(path) -> TrainedModel:
    return model_from_bytes(Path(path).read_bytes(), str(path))


# -- run configuration -----------------------------------------------------

@dataclass
class RunConfig:
    """Parameters of one evaluation run.

    ``onset_s=None`` takes the onset from the tensor header (key ``onset_s``)
    and falls back to 0.64 s (0.5 s gaze shift plus 0.14 s latency).
    """
    d_seconds: float = 1.0
    n_channels_used: int = 9
    channel_order: list[str] = field(default_factory=lambda: list(DEFAULT_CHANNELS))
    n_target_blocks: int = 3
    n_subbands: int = 3
    band_edges: list[list[float]] | None = None
    band_ceiling_hz: float | None = None
    filter_order: int = 4
    ripple_db: float = 0.5
    zero_phase: bool = True
    gamma: float = 0.5
    c_lb: float = 0.9
    trigger_mode: str = "absolute"
    shared_selection: bool = False
    onset_s: float | None = None
    algorithm: str = "ss-itrca"
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.d_seconds > 0:
            raise ValueError("d_seconds must be > 0")
        if not 1 <= self.n_channels_used <= len(self.channel_order):
            raise ValueError(
                f"n_channels_used must lie in [1, {len(self.channel_order)}]")
        if self.n_target_blocks < 1:
            raise ValueError("n_target_blocks must be >= 1")
        if self.n_subbands < 1:
            raise ValueError("n_subbands must be >= 1")
        if self.band_edges is not None and len(self.band_edges) != self.n_subbands:
            raise ValueError("band_edges needs one [low, high] pair per sub-band")
        if self.onset_s is not None and self.onset_s < 0:
            raise ValueError("onset_s must be >= 0")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        SelectionConfig(self.gamma, self.c_lb, True, self.trigger_mode, self.shared_selection)

    def selection(self) -> SelectionConfig:
        return SelectionConfig(self.gamma, self.c_lb, True, self.trigger_mode,
                               self.shared_selection)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **overrides) -> "RunConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return type(self).from_dict(d)
