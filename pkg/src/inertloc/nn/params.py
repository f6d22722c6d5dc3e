"""Named parameter collection with optimizer state and a binary checkpoint format."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import InvalidInputError
from .core import Tensor

CHECKPOINT_MAGIC = b"ILCK"
CHECKPOINT_VERSION = 1


class ParamStore:
    """Ordered mapping of names to trainable tensors plus per-tensor moments."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.moments: dict[str, list[np.ndarray]] = {}
        self.step_count = 0

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise InvalidInputError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(data), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def n_elements(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]):
        for k, t in self._params.items():
            if k not in values:
                raise InvalidInputError(f"missing parameter {k!r}")
            if values[k].shape != t.data.shape:
                raise InvalidInputError(f"shape mismatch for {k!r}")
            t.data = values[k].astype(t.data.dtype).copy()

    # -- initializers -------------------------------------------------------

    def add_affine(self, name: str, fan_in: int, fan_out: int,
                   rng: np.random.Generator):
        bound = 1.0 / np.sqrt(fan_in)
        self.add(name + ".w", rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        self.add(name + ".b", np.zeros(fan_out))

    def add_conv1d(self, name: str, k: int, c_in: int, c_out: int,
                   rng: np.random.Generator):
        bound = 1.0 / np.sqrt(k * c_in)
        self.add(name + ".w", rng.uniform(-bound, bound, size=(k, c_in, c_out)))
        self.add(name + ".b", np.zeros(c_out))

    def add_conv2d(self, name: str, kh: int, kw: int, c_in: int, c_out: int,
                   rng: np.random.Generator):
        bound = 1.0 / np.sqrt(kh * kw * c_in)
        self.add(name + ".w", rng.uniform(-bound, bound, size=(kh, kw, c_in, c_out)))
        self.add(name + ".b", np.zeros(c_out))

    def add_per_pixel(self, name: str, h: int, w: int, c_in: int, c_out: int,
                      rng: np.random.Generator):
        bound = 1.0 / np.sqrt(c_in)
        self.add(name + ".w", rng.uniform(-bound, bound, size=(h, w, c_in, c_out)))
        self.add(name + ".b", np.zeros((h, w, c_out)))

    def add_layer_norm(self, name: str, dim: int):
        self.add(name + ".g", np.ones(dim))
        self.add(name + ".s", np.zeros(dim))

    # -- checkpoint I/O -----------------------------------------------------

    def save(self, path):
        """Binary checkpoint: magic, version, then one record per tensor."""
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<I", CHECKPOINT_VERSION))
            for name, t in self._params.items():
                encoded = name.encode("utf-8")
                data = t.data.astype("<f4")
                f.write(struct.pack("<H", len(encoded)))
                f.write(encoded)
                f.write(struct.pack("<B", data.ndim))
                f.write(struct.pack(f"<{data.ndim}I", *data.shape))
                f.write(data.tobytes())

    @staticmethod
    def read_values(path) -> dict[str, np.ndarray]:
        with open(path, "rb") as f:
            raw = f.read()
        if raw[:4] != CHECKPOINT_MAGIC:
            raise InvalidInputError(f"{path}: bad checkpoint magic")
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != CHECKPOINT_VERSION:
            raise InvalidInputError(f"{path}: unsupported checkpoint version {version}")
        values = {}
        off = 8
        while off < len(raw):
            (name_len,) = struct.unpack_from("<H", raw, off)
            off += 2
            name = raw[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<B", raw, off)
            off += 1
            dims = struct.unpack_from(f"<{rank}I", raw, off)
            off += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off)
            off += 4 * count
            values[name] = arr.reshape(dims).copy()
        return values

    @classmethod
    def load(cls, path) -> "ParamStore":
        store = cls()
        for name, arr in cls.read_values(path).items():
            store.add(name, arr)
        return store
