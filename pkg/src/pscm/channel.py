"""Complex AWGN with unit total noise variance and reproducible seeding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

NOISE_METHOD = ("numpy PCG64 seeded by SeedSequence([seed, worker]); "
                "Generator.standard_normal (ziggurat) scaled by sqrt(1/2), real then imag interleaved")


def noise_generator(seed: int, worker: int = 0) -> np.random.Generator:
    if seed < 0 or worker < 0:
        raise ParameterError("seed and worker index must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(worker)])))


@dataclass
class AwgnChannel:
    """``y = x + z`` with ``z ~ CN(0, 1)``; ``noiseless`` is a debugging bypass."""

    seed: int
    worker: int = 0
    noiseless: bool = False
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._rng = noise_generator(self.seed, self.worker)

    @property
    def variance(self) -> float:
        return 0.0 if self.noiseless else 1.0

    def noise(self, count: int) -> np.ndarray:
        z = self._rng.standard_normal(2 * count).view(np.complex128)
        return z * math.sqrt(0.5)

    def transmit(self, symbols) -> np.ndarray:
        x = np.asarray(symbols, dtype=np.complex128)
        if not np.all(np.isfinite(x)):
            raise ParameterError("symbols must be finite")
        if self.noiseless:
            return x.copy()
        return x + self.noise(x.size).reshape(x.shape)


def transmit(ch: AwgnChannel, symbols) -> np.ndarray:
    return ch.transmit(symbols)
