"""Synthetic logits with controllable difficulty and miscalibration.

Rows are i.i.d. (hence exchangeable): a uniform label, a one-hot signal
bump on the true class, Gaussian noise everywhere, and a global
overconfidence multiplier g.  Multiplying logits by g is the same as
dividing the temperature by g, so g > 1 produces the sharp, miscalibrated
regime where tuning pays off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LogitsDataset
from .errors import ValidationError


@dataclass(frozen=True)
class SynthSpec:
    n: int
    k: int
    seed: int = 0
    signal: float = 2.0
    noise: float = 1.0
    overconfidence: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.signal <= 0 or self.noise <= 0 or self.overconfidence <= 0:
            raise ValidationError("signal, noise, and overconfidence must be positive")
        if self.seed < 0:
            raise ValidationError("seed must be a non-negative integer")


def generate(spec: SynthSpec) -> LogitsDataset:
    """Deterministic-in-seed sample of the synthetic logits model."""
    rng = np.random.default_rng(spec.seed)
    labels = rng.integers(0, spec.k, size=spec.n)
    noise = rng.standard_normal((spec.n, spec.k))
    logits = spec.noise * noise
    logits[np.arange(spec.n), labels] += spec.signal
    logits *= spec.overconfidence
    return LogitsDataset(logits, labels)


def generate_paired_shifted(spec: SynthSpec, shift: float) -> tuple[LogitsDataset, LogitsDataset]:
    """An in-distribution dataset plus a harder one (signal reduced by shift)."""
    if shift >= spec.signal:
        raise ValidationError(
            f"shift must be < signal ({spec.signal}), got {shift}"
        )
    base = generate(spec)
    child_seed = np.random.SeedSequence(spec.seed).spawn(1)[0]
    rng = np.random.default_rng(child_seed)
    labels = rng.integers(0, spec.k, size=spec.n)
    noise = rng.standard_normal((spec.n, spec.k))
    logits = spec.noise * noise
    logits[np.arange(spec.n), labels] += spec.signal - shift
    logits *= spec.overconfidence
    return base, LogitsDataset(logits, labels)
