"""Named parameter collections, freezing, seeding and checkpoint I/O."""
from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path

import numpy as np

from ..errors import StateError
from .tensor import Tensor

CHECKPOINT_MAGIC = b"PERLCKPT"
CHECKPOINT_VERSION = 1


def make_rng(seed, *keys):
    """Counter-based (Philox) generator; ``keys`` derive independent streams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


class ParameterStore:
    """Ordered name -> Tensor mapping with a frozen set and step counter."""

    def __init__(self, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self._params: OrderedDict[str, Tensor] = OrderedDict()
        self.frozen: set[str] = set()
        self.step = 0
        self.meta: dict = {}

    def __contains__(self, name):
        return name in self._params

    def __getitem__(self, name):
        return self._params[name]

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self):
        return list(self._params)

    def add(self, name, value):
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(value, dtype=self.dtype), requires_grad=True)
        self._params[name] = t
        return t

    def sub(self, prefix):
        """View of the parameters under ``prefix`` keyed by the remainder."""
        n = len(prefix)
        return {k[n:]: v for k, v in self._params.items() if k.startswith(prefix)}

    def update(self, other: "ParameterStore"):
        """Adopt every parameter (and frozen flag) of ``other``."""
        for name, t in other.items():
            if name in self._params:
                raise KeyError(f"duplicate parameter name {name!r}")
            self._params[name] = t
        self.frozen |= other.frozen
        for k, v in other.meta.items():
            self.meta.setdefault(k, v)

    # -- freezing ----------------------------------------------------------
    def freeze(self, prefix=""):
        for name, t in self._params.items():
            if name.startswith(prefix):
                self.frozen.add(name)
                t.requires_grad = False
                t.grad = None

    def is_frozen(self, name):
        return name in self.frozen

    def trainable(self):
        return [(k, v) for k, v in self._params.items() if k not in self.frozen]

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    # -- init helpers --------------------------------------------------------
    def normal(self, name, shape, rng, std=0.02):
        return self.add(name, rng.normal(0.0, std, size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def ones(self, name, shape):
        return self.add(name, np.ones(shape))

    def astype(self, dtype):
        """Deep copy in another precision (e.g. float64 for gradient checks)."""
        out = ParameterStore(dtype)
        for name, t in self._params.items():
            out.add(name, t.data)
        out.freeze_names(self.frozen)
        out.step = self.step
        out.meta = json.loads(json.dumps(self.meta))
        return out

    def freeze_names(self, names):
        for name in names:
            self.frozen.add(name)
            self._params[name].requires_grad = False

    def snapshot(self):
        return {k: v.data.copy() for k, v in self._params.items()}

    # -- checkpoint I/O ------------------------------------------------------
    def save(self, path):
        """Write a self-describing little-endian float32 checkpoint."""
        records = [{"name": k, "shape": list(v.shape)} for k, v in self._params.items()]
        header = {
            "version": CHECKPOINT_VERSION,
            "step": self.step,
            "frozen": sorted(self.frozen),
            "meta": self.meta,
            "records": records,
        }
        hbytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as f:
            f.write(CHECKPOINT_MAGIC)
            f.write(struct.pack("<II", CHECKPOINT_VERSION, len(hbytes)))
            f.write(hbytes)
            for t in self._params.values():
                f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path):
        path = Path(path)
        raw = path.read_bytes()
        if raw[:8] != CHECKPOINT_MAGIC:
            raise StateError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<II", raw[8:16])
        if version != CHECKPOINT_VERSION:
            raise StateError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(raw[16:16 + hlen].decode("utf-8"))
        store = cls(np.float32)
        off = 16 + hlen
        for rec in header["records"]:
            count = int(np.prod(rec["shape"], dtype=np.int64))
            if off + 4 * count > len(raw):
                raise StateError(f"{path}: truncated at parameter {rec['name']!r}")
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=off).reshape(rec["shape"])
            off += 4 * count
            store.add(rec["name"], arr)
        if off != len(raw):
            raise StateError(f"{path}: trailing or missing bytes")
        store.freeze_names(header["frozen"])
        store.step = header["step"]
        store.meta = header["meta"]
        return store
