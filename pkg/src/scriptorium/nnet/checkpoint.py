"""Checkpoint persistence: model parameters, optimizer state, metadata."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import container
from ..errors import CorruptFile
from ..textcore import Alphabet
from .model import CrnnConfig, MiniCrnn

_HP_FIELDS = ("num_classes", "height", "conv1", "conv2", "kernel", "hidden")


@dataclass
class Checkpoint:
    config: CrnnConfig
    params: dict[str, np.ndarray]
    alphabet: Alphabet
    optimizer_state: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict[str, float] = field(default_factory=dict)

    def build_model(self) -> MiniCrnn:
        model = MiniCrnn(self.config, seed=0)
        model.load_arrays(self.params)
        return model


def save_checkpoint(
    path: str | Path,
    model: MiniCrnn,
    alphabet: Alphabet,
    optimizer_state: dict[str, np.ndarray] | None = None,
    meta: dict[str, float] | None = None,
) -> None:
    arrays: dict[str, np.ndarray] = {
        "hp": np.array([getattr(model.config, f) for f in _HP_FIELDS], dtype=np.float64),
        "alphabet": np.array([ord(c) for c in alphabet.symbols], dtype=np.float64),
    }
    for name, tensor in model.params.items():
        arrays[f"param.{name}"] = tensor.data
    for name, value in (optimizer_state or {}).items():
        arrays[f"opt.{name}"] = np.asarray(value, dtype=np.float64)
    for name, value in (meta or {}).items():
        arrays[f"meta.{name}"] = np.array(float(value))
    container.write_arrays(path, arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    arrays = container.read_arrays(path)
    try:
        hp = arrays["hp"]
        alphabet = Alphabet(tuple(chr(int(c)) for c in arrays["alphabet"]))
        config = CrnnConfig(**{f: int(v) for f, v in zip(_HP_FIELDS, hp)})
        params = {k[len("param."):]: v for k, v in arrays.items() if k.startswith("param.")}
        expected = set(MiniCrnn(config, seed=0).params)
        if set(params) != expected:
            raise CorruptFile(f"{path}: parameter records do not match the architecture")
    except KeyError as exc:
        raise CorruptFile(f"{path}: missing record {exc}") from exc
    return Checkpoint(
        config=config,
        params=params,
        alphabet=alphabet,
        optimizer_state={k[len("opt."):]: v for k, v in arrays.items() if k.startswith("opt.")},
        meta={k[len("meta."):]: float(v) for k, v in arrays.items() if k.startswith("meta.")},
    )
