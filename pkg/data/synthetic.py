import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from data.configs import (
    CHANNELS,
    COSINES_PER_PROTOTYPE,
    MAX_AMPLITUDE,
    MAX_FREQUENCY,
    MIN_AMPLITUDE,
    PROTOTYPE_SEPARATION,
    SEED_KEY_BACKGROUND,
    SEED_KEY_PROTOTYPES,
    SEED_KEY_TEST,
    SEED_KEY_TRAIN,
)
from data.samples import AudioSample, LabelPair, PairedSample, VisualSample
from utils.errors import ContractError, GenerationError, SamplingError
from utils.model_commons import digest_arrays, make_rng


# pylint: disable=too-many-instance-attributes
@dataclass
class SynthSpec:
    """Class prototypes and generation settings of one synthetic dataset."""

    n_classes: int
    image_hw: Tuple[int, int]
    spec_ft: Tuple[int, int]
    noise_std: float
    train_size: int
    test_size: int
    test_mismatch_ratio: float
    seed: int
    n_jobs: int = 1
    visual_prototypes: Optional[np.ndarray] = field(default=None, repr=False)
    audio_prototypes: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.visual_prototypes is None or self.audio_prototypes is None:
            self.visual_prototypes, self.audio_prototypes = build_prototypes(
                self.n_classes, self.image_hw, self.spec_ft, self.seed
            )
        check_separation(self.visual_prototypes, self.noise_std, "visual")
        check_separation(self.audio_prototypes, self.noise_std, "audio")

    @classmethod
    def from_config(cls, config):
        return cls(
            n_classes=config.n_classes,
            image_hw=tuple(config.image_hw),
            spec_ft=tuple(config.spec_ft),
            noise_std=config.noise_std,
            train_size=config.train_size,
            test_size=config.test_size,
            test_mismatch_ratio=config.test_mismatch_ratio,
            seed=config.seed,
            n_jobs=config.n_jobs,
        )


def _cosine_field(rng, height, width):
    # Sum of low-frequency 2-D cosines scaled to [-1, 1]
    rows = np.arange(height)[:, None] / height
    cols = np.arange(width)[None, :] / width
    total = np.zeros((height, width))
    amplitude_sum = 0.0
    for _ in range(COSINES_PER_PROTOTYPE):
        fy, fx = rng.integers(0, MAX_FREQUENCY + 1, size=2)
        if fy == 0 and fx == 0:
            fx = 1
        amplitude = rng.uniform(MIN_AMPLITUDE, MAX_AMPLITUDE)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        total += amplitude * np.cos(2.0 * np.pi * (fy * rows + fx * cols) + phase)
        amplitude_sum += amplitude
    return total / amplitude_sum


def build_prototypes(n_classes, image_hw, spec_ft, seed):
    """Per-class visual [C, 3, H, W] in [0, 1] and audio [C, F, T] prototypes."""
    rng = make_rng(seed, SEED_KEY_PROTOTYPES)
    height, width = image_hw
    freq, time = spec_ft
    visual = np.empty((n_classes, CHANNELS, height, width))
    audio = np.empty((n_classes, freq, time))
    for c in range(n_classes):
        for channel in range(CHANNELS):
            visual[c, channel] = 0.5 + 0.5 * _cosine_field(rng, height, width)
        audio[c] = _cosine_field(rng, freq, time)
    return visual, audio


def check_separation(prototypes, noise_std, what):
    """Raise GenerationError unless all prototypes are > 10 * noise_std apart."""
    flat = prototypes.reshape(prototypes.shape[0], -1)
    diffs = flat[:, None, :] - flat[None, :, :]
    distances = np.sqrt((diffs**2).sum(axis=-1))
    np.fill_diagonal(distances, np.inf)
    closest = float(distances.min()) if len(flat) > 1 else np.inf
    if not closest > PROTOTYPE_SEPARATION * noise_std:
        raise GenerationError(
            f"{what} prototypes are only {closest:.4f} apart; need more than "
            f"{PROTOTYPE_SEPARATION} x noise_std = {PROTOTYPE_SEPARATION * noise_std:.4f}"
        )


@dataclass
class PairedDataset:
    """Column-wise storage of paired samples; each array has N leading rows."""

    visual: np.ndarray  # [N, 3, H, W]
    audio: np.ndarray  # [N, F, T]
    y_b: np.ndarray  # [N] int
    y_f: np.ndarray  # [N] int, -1 for background
    visual_class: np.ndarray
    audio_class: np.ndarray

    def __post_init__(self):
        count = len(self.visual)
        for name in ("audio", "y_b", "y_f", "visual_class", "audio_class"):
            if len(getattr(self, name)) != count:
                raise ContractError(f"column '{name}' does not have {count} rows")

    def __len__(self):
        return len(self.visual)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return PairedDataset(
            visual=self.visual[indices],
            audio=self.audio[indices],
            y_b=self.y_b[indices],
            y_f=self.y_f[indices],
            visual_class=self.visual_class[indices],
            audio_class=self.audio_class[indices],
        )

    def foreground(self):
        return self.subset(np.flatnonzero(self.y_b == 0))

    def sample(self, index) -> PairedSample:
        return PairedSample(
            visual=VisualSample(self.visual[index]),
            audio=AudioSample(self.audio[index]),
            label=LabelPair(int(self.y_b[index]), int(self.y_f[index])),
            visual_class=int(self.visual_class[index]),
            audio_class=int(self.audio_class[index]),
        )

    @classmethod
    def from_samples(cls, samples):
        samples = list(samples)
        if not samples:
            raise ContractError("a dataset needs at least one sample")
        return cls(
            visual=np.stack([s.visual.pixels for s in samples]),
            audio=np.stack([s.audio.spectrogram for s in samples]),
            y_b=np.array([s.label.y_b for s in samples], dtype=np.int64),
            y_f=np.array([s.label.y_f for s in samples], dtype=np.int64),
            visual_class=np.array([s.visual_class for s in samples], dtype=np.int64),
            audio_class=np.array([s.audio_class for s in samples], dtype=np.int64),
        )

    def arrays(self):
        return [self.visual, self.audio, self.y_b, self.y_f, self.visual_class, self.audio_class]

    def digest(self) -> str:
        return digest_arrays(self.arrays())


@dataclass
class SynthDataset:
    spec: SynthSpec
    train: PairedDataset
    test: PairedDataset

    def digest(self) -> str:
        """64-bit checksum of every payload and label, train split first."""
        return digest_arrays(self.train.arrays() + self.test.arrays())


def _noisy_pair(spec: SynthSpec, split_key, index, visual_class, audio_class):
    rng = make_rng(spec.seed, split_key, index)
    visual = spec.visual_prototypes[visual_class]
    audio = spec.audio_prototypes[audio_class]
    if spec.noise_std > 0:
        visual = np.clip(visual + rng.normal(0.0, spec.noise_std, size=visual.shape), 0.0, 1.0)
        audio = audio + rng.normal(0.0, spec.noise_std, size=audio.shape)
    return visual.copy(), audio.copy()


def _background_plan(spec: SynthSpec, size):
    # Background indices of the test split and the audio class each one uses
    count = math.floor(spec.test_mismatch_ratio * size)
    rng = make_rng(spec.seed, SEED_KEY_BACKGROUND)
    chosen = np.sort(rng.permutation(size)[:count])
    shifts = rng.integers(0, spec.n_classes - 1, size=count)
    return dict(zip(chosen.tolist(), shifts.tolist()))


def _generate_split(spec: SynthSpec, size, split_key, background=None):
    background = background or {}
    visual_class = np.arange(size, dtype=np.int64) % spec.n_classes
    audio_class = visual_class.copy()
    for index, shift in background.items():
        audio_class[index] = (visual_class[index] + 1 + shift) % spec.n_classes

    pairs = Parallel(n_jobs=spec.n_jobs)(
        delayed(_noisy_pair)(spec, split_key, i, visual_class[i], audio_class[i])
        for i in range(size)
    )
    y_b = (visual_class != audio_class).astype(np.int64)
    return PairedDataset(
        visual=np.stack([p[0] for p in pairs]),
        audio=np.stack([p[1] for p in pairs]),
        y_b=y_b,
        y_f=np.where(y_b == 0, visual_class, -1),
        visual_class=visual_class,
        audio_class=audio_class,
    )


def gen_dataset(spec: SynthSpec) -> SynthDataset:
    """Train split (all foreground) and a test split with background pairs.

    Foreground class is the sample index modulo C; every sample draws its noise
    from its own (seed, split, index) stream.
    """
    train = _generate_split(spec, spec.train_size, SEED_KEY_TRAIN)
    test = _generate_split(
        spec, spec.test_size, SEED_KEY_TEST, _background_plan(spec, spec.test_size)
    )
    return SynthDataset(spec=spec, train=train, test=test)


def sample_mismatch(batch: PairedDataset, ratio, seed, *keys) -> PairedDataset:
    """Replace floor(ratio * B) samples by cross-class pairs labelled background.

    The audio of a chosen sample is swapped for the audio of another batch
    sample whose audio class differs from the chosen sample's visual class.
    """
    if not 0.0 <= ratio <= 1.0:
        raise SamplingError(f"mismatch ratio must lie in [0, 1], got {ratio}")
    if ratio > 0 and len(np.unique(batch.audio_class)) < 2:
        raise SamplingError("mismatch pairs need at least two distinct classes in the batch")
    size = len(batch)
    count = math.floor(ratio * size)
    if count == 0:
        return batch

    rng = make_rng(seed, *keys)
    chosen = np.sort(rng.choice(size, size=count, replace=False))
    audio = batch.audio.copy()
    audio_class = batch.audio_class.copy()
    for index in chosen:
        sources = np.flatnonzero(batch.audio_class != batch.visual_class[index])
        if sources.size == 0:
            raise SamplingError(f"no audio of a class other than {batch.visual_class[index]}")
        source = int(rng.choice(sources))
        audio[index] = batch.audio[source]
        audio_class[index] = batch.audio_class[source]

    y_b = batch.y_b.copy()
    y_f = batch.y_f.copy()
    y_b[chosen] = 1
    y_f[chosen] = -1
    return PairedDataset(
        visual=batch.visual,
        audio=audio,
        y_b=y_b,
        y_f=y_f,
        visual_class=batch.visual_class,
        audio_class=audio_class,
    )
