"""Sampling of the stationary delayed renewal sequence.

Random numbers come from numpy's ``PCG64``. A sequence is identified by
``(seed, stream)``: the bit generator is seeded with
``SeedSequence(seed, spawn_key=(stream,))`` (plain ``SeedSequence(seed)`` when
``stream`` is ``None``). Each waiting time consumes exactly one double
``u = 1 - Generator.random()`` in ``(0, 1]``; the first one is the delay
``S1``. The draw returns the smallest ``s`` with ``u <= CDF(s)``.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import errors
from .dist import WaitingTimeDistribution, stationary_delay

MAGIC = b"RBSQ1"
_BLOCK = 1 << 16


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise errors.ModelError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def make_rng(seed, stream=None) -> np.random.Generator:
    seed = _check_seed(seed)
    ss = np.random.SeedSequence(seed) if stream is None else np.random.SeedSequence(
        seed, spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def _cdf(density):
    cdf = np.cumsum(np.asarray(density, dtype=float)[1:])
    if abs(cdf[-1] - 1.0) > 1e-12:
        raise errors.ModelError(f"density sums to {cdf[-1]!r}, not 1")
    cdf[-1] = 1.0
    return cdf


@dataclass
class GeneratorState:
    """Sampling tables plus the RNG stream. Single owner, not thread safe."""

    cdf_delay: np.ndarray
    cdf_wait: np.ndarray
    rng: np.random.Generator
    next_renewal: int = 0

    @classmethod
    def from_model(cls, model: WaitingTimeDistribution, seed, stream=None):
        return cls(
            cdf_delay=_cdf(stationary_delay(model).density),
            cdf_wait=_cdf(model.density),
            rng=make_rng(seed, stream),
        )


def _draw(cdf, u):
    return np.searchsorted(cdf, u, side="left") + 1


def sample_first_waiting(state: GeneratorState) -> int:
    """Draw ``S1`` from the stationary delay law."""
    s = int(_draw(state.cdf_delay, 1.0 - state.rng.random()))
    state.next_renewal = s
    return s


def sample_waiting(state: GeneratorState) -> int:
    """Draw one of ``S2, S3, ...``."""
    s = int(_draw(state.cdf_wait, 1.0 - state.rng.random()))
    state.next_renewal += s
    return s


@dataclass(frozen=True, eq=False)
class BinarySequence:
    """Packed 0/1 sequence (LSB first) with its generation provenance."""

    packed: np.ndarray
    length: int
    seed: int | None = None
    stream: int | None = None
    model_id: str | None = None
    renewal_count: int = 0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_bits(cls, bits, **kw):
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 1 or np.any(bits > 1):
            raise errors.ModelError("bits must be a 1-d array of 0/1")
        return cls(packed=np.packbits(bits, bitorder="little"), length=int(bits.size),
                   renewal_count=int(bits.sum()), **kw)

    def __len__(self):
        return self.length

    @cached_property
    def bits(self) -> np.ndarray:
        out = np.unpackbits(self.packed, count=self.length, bitorder="little")
        out.flags.writeable = False
        return out

    @cached_property
    def ones(self) -> np.ndarray:
        """1-based positions of the symbol 1."""
        return np.flatnonzero(self.bits) + 1

    def trailer(self) -> dict:
        return {"seed": self.seed, "stream": self.stream, "model_id": self.model_id,
                "renewal_count": self.renewal_count, **self.meta}

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", self.length))
            fh.write(self.packed.tobytes())
            fh.write(json.dumps(self.trailer(), sort_keys=True).encode())

    def save_text(self, path):
        with open(path, "w") as fh:
            fh.write("".join("01"[b] for b in self.bits.tolist()))
            fh.write("\n")


def load(path) -> BinarySequence:
    """Read a sequence written by :meth:`BinarySequence.save`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:5] != MAGIC:
        raise errors.ModelError(f"{path}: not an RBSQ1 file")
    (length,) = struct.unpack("<Q", raw[5:13])
    nbytes = (length + 7) // 8
    packed = np.frombuffer(raw[13:13 + nbytes], dtype=np.uint8).copy()
    if packed.size != nbytes:
        raise errors.ModelError(f"{path}: truncated bit payload")
    trailer = json.loads(raw[13 + nbytes:].decode() or "{}")
    seq = BinarySequence(
        packed=packed, length=length,
        seed=trailer.pop("seed", None), stream=trailer.pop("stream", None),
        model_id=trailer.pop("model_id", None),
        renewal_count=trailer.pop("renewal_count", 0), meta=trailer,
    )
    if int(seq.bits.sum()) != seq.renewal_count:
        raise errors.ModelError(f"{path}: renewal_count does not match the payload")
    return seq


def load_text(path) -> BinarySequence:
    with open(path) as fh:
        txt = "".join(fh.read().split())
    bits = np.frombuffer(txt.encode(), dtype=np.uint8) - ord("0")
    return BinarySequence.from_bits(bits)


def _set_bits(packed, pos):
    # pos: strictly increasing 0-based indices
    byte = pos >> 3
    base = int(byte[0])
    vals = np.bincount(byte - base, weights=np.left_shift(1, pos & 7), minlength=0)
    packed[base: base + vals.size] |= vals.astype(np.uint8)


def generate(model: WaitingTimeDistribution, length, seed, stream=None) -> BinarySequence:
    """Sample ``X_1..X_length`` of the stationary sequence.

    Waiting times are drawn in blocks; the bits depend only on
    ``(model, seed, stream)``, never on the block size.
    """
    length = int(length)
    if length < 1:
        raise errors.ModelError("length must be >= 1")
    state = GeneratorState.from_model(model, seed, stream)
    packed = np.zeros((length + 7) // 8, dtype=np.uint8)
    pos = sample_first_waiting(state)
    count = 0
    if pos <= length:
        _set_bits(packed, np.array([pos - 1]))
        count = 1
        mu = model.mean
        while True:
            remaining = length - pos
            n = int(min(_BLOCK, max(16, 1.1 * remaining / mu + 16)))
            u = 1.0 - state.rng.random(n)
            steps = _draw(state.cdf_wait, u)
            times = pos + np.cumsum(steps)
            k = int(np.searchsorted(times, length, side="right"))
            if k:
                _set_bits(packed, times[:k] - 1)
                count += k
            if k < n:
                state.next_renewal = int(times[k])
                break
            pos = int(times[-1])
    return BinarySequence(packed=packed, length=length, seed=int(seed), stream=stream,
                          model_id=model.model_id, renewal_count=count)


def generate_replicas(model, length, base_seed, n_replicas, threads=1):
    """Replica ``k`` is ``generate(model, length, base_seed, stream=k)``."""
    n = int(n_replicas)
    if n < 1:
        raise errors.ModelError("n_replicas must be >= 1")

    def one(k):
        return generate(model, length, base_seed, stream=k)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as ex:
            return list(ex.map(one, range(n)))
    return [one(k) for k in range(n)]
