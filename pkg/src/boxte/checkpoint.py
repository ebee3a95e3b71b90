"""Checkpoint files: a text header followed by a raw float64 payload.

Layout::

    boxte-checkpoint 1
    [config]
    key=value ...
    [sizes]
    entities=..  relations=..  timestamps=..
    vocab_digest=<sha256 of the vocabulary>
    [tensors]
    name=shape (e.g. entity_base=20x32), in the fixed tensor order
    [adam]                      (optional)
    step=.. beta1=.. beta2=.. eps=..
    [payload]
    bytes=<payload length>
    sha256=<payload digest>
    [end]
    <payload bytes>

The payload holds every parameter tensor as little-endian float64 in the
fixed order (entity_base, entity_bump, head corners 1/2, tail corners 1/2,
alpha, time_bank or time_left + time_right, then any variant tensors),
followed, when Adam state is saved, by all first moments and then all
second moments in the same order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import CheckpointError, ConfigError
from .model import TENSOR_ORDER, ModelParams
from .train import AdamState

MAGIC = "boxte-checkpoint"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    config: RunConfig
    sizes: tuple[int, int, int]
    vocab_digest: str
    params: ModelParams
    adam: AdamState | None = None


def _shape_text(shape) -> str:
    return "x".join(str(s) for s in shape) if shape else "scalar"


def _parse_shape(text: str) -> tuple[int, ...]:
    return () if text == "scalar" else tuple(int(s) for s in text.split("x"))


def encode(ckpt: Checkpoint) -> bytes:
    tensors = list(ckpt.params.tensors())
    chunks = [np.ascontiguousarray(v, dtype=_DTYPE).tobytes() for _, v in tensors]
    if ckpt.adam is not None:
        chunks += [np.ascontiguousarray(ckpt.adam.m[n], dtype=_DTYPE).tobytes() for n, _ in tensors]
        chunks += [np.ascontiguousarray(ckpt.adam.v[n], dtype=_DTYPE).tobytes() for n, _ in tensors]
    payload = b"".join(chunks)
    E, R, T = ckpt.sizes
    lines = [f"{MAGIC} {FORMAT_VERSION}", "[config]", ckpt.config.to_text().rstrip("\n"),
             "[sizes]", f"entities={E}", f"relations={R}", f"timestamps={T}",
             f"vocab_digest={ckpt.vocab_digest}", "[tensors]"]
    lines += [f"{name}={_shape_text(value.shape)}" for name, value in tensors]
    if ckpt.adam is not None:
        a = ckpt.adam
        lines += ["[adam]", f"step={a.step}", f"beta1={a.beta1!r}", f"beta2={a.beta2!r}", f"eps={a.eps!r}"]
    lines += ["[payload]", f"bytes={len(payload)}", f"sha256={hashlib.sha256(payload).hexdigest()}", "[end]"]
    return ("\n".join(lines) + "\n").encode("utf-8") + payload


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(ckpt))


def _sections(header: str) -> dict[str, list[str]]:
    lines = header.split("\n")
    if not lines or lines[0] != f"{MAGIC} {FORMAT_VERSION}":
        raise CheckpointError(f"not a version-{FORMAT_VERSION} checkpoint (header {lines[0][:40]!r})")
    sections: dict[str, list[str]] = {}
    current = None
    for line in lines[1:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            raise CheckpointError(f"stray header line {line!r}")
        elif line:
            sections[current].append(line)
    return sections


def _kv(lines: list[str]) -> dict[str, str]:
    out = {}
    for line in lines:
        if "=" not in line:
            raise CheckpointError(f"malformed header line {line!r}")
        key, value = line.split("=", 1)
        out[key] = value
    return out


def decode(data: bytes) -> Checkpoint:
    marker = b"\n[end]\n"
    cut = data.find(marker)
    if cut < 0:
        raise CheckpointError("checkpoint header is not terminated")
    try:
        header = data[:cut + 1].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CheckpointError("checkpoint header is not valid text") from exc
    payload = data[cut + len(marker):]
    sec = _sections(header)
    for name in ("config", "sizes", "tensors", "payload"):
        if name not in sec:
            raise CheckpointError(f"checkpoint header lacks [{name}]")

    meta = _kv(sec["payload"])
    if int(meta.get("bytes", -1)) != len(payload):
        raise CheckpointError(f"payload length {len(payload)} differs from header {meta.get('bytes')}")
    if hashlib.sha256(payload).hexdigest() != meta.get("sha256"):
        raise CheckpointError("payload digest mismatch")
    try:
        config = RunConfig.parse(sec["config"])
    except ConfigError as exc:
        raise CheckpointError(f"bad config block: {exc}") from exc
    sizes_kv = _kv(sec["sizes"])
    sizes = (int(sizes_kv["entities"]), int(sizes_kv["relations"]), int(sizes_kv["timestamps"]))

    shapes = [(name, _parse_shape(text)) for name, text in _kv(sec["tensors"]).items()]
    names = [n for n, _ in shapes]
    if any(n not in TENSOR_ORDER for n in names) or names != sorted(names, key=TENSOR_ORDER.index):
        raise CheckpointError(f"unexpected tensor list {names}")
    has_adam = "adam" in sec
    expected = sum(int(np.prod(s)) for _, s in shapes) * _DTYPE.itemsize * (3 if has_adam else 1)
    if expected != len(payload):
        raise CheckpointError(f"payload holds {len(payload)} bytes, tensor shapes need {expected}")

    offset = 0

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype=_DTYPE, count=count, offset=offset).reshape(shape)
        offset += count * _DTYPE.itemsize
        return arr.astype(np.float64)

    params = ModelParams.from_dict({name: take(shape) for name, shape in shapes})
    adam = None
    if has_adam:
        m = {name: take(shape) for name, shape in shapes}
        v = {name: take(shape) for name, shape in shapes}
        a = _kv(sec["adam"])
        adam = AdamState(m, v, int(a["step"]), float(a["beta1"]), float(a["beta2"]), float(a["eps"]))
    return Checkpoint(config, sizes, sizes_kv.get("vocab_digest", ""), params, adam)


def load_checkpoint(path: str | Path, vocab_digest: str | None = None) -> Checkpoint:
    """Read a checkpoint; if ``vocab_digest`` is given it must match the stored one."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    ckpt = decode(data)
    if vocab_digest is not None and vocab_digest != ckpt.vocab_digest:
        raise CheckpointError("vocabulary digest mismatch between checkpoint and dataset")
    return ckpt
