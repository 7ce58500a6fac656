from dataclasses import dataclass

import numpy as np

from data.configs import CHANNELS
from utils.errors import ConfigError, DimensionError


@dataclass
class VisualSample:
    """Image pixels [3, H, W] in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 3 or self.pixels.shape[0] != CHANNELS:
            raise DimensionError(f"visual sample must be [3, H, W], got {self.pixels.shape}")

    def check_patches(self, patch_size):
        _, height, width = self.pixels.shape
        if height % patch_size or width % patch_size:
            raise ConfigError(f"image {height}x{width} is not divisible by patch {patch_size}")


@dataclass
class AudioSample:
    """Log-magnitude spectrogram [F, T]."""

    spectrogram: np.ndarray

    def __post_init__(self):
        self.spectrogram = np.asarray(self.spectrogram, dtype=np.float64)
        if self.spectrogram.ndim != 2:
            raise DimensionError(f"audio sample must be [F, T], got {self.spectrogram.shape}")

    def check_patches(self, patch_size):
        freq, time = self.spectrogram.shape
        if freq % patch_size or time % patch_size:
            raise ConfigError(f"spectrogram {freq}x{time} is not divisible by patch {patch_size}")


@dataclass(frozen=True)
class LabelPair:
    """y_b = 1 marks a mismatched (background) pair; y_f is -1 for those."""

    y_b: int
    y_f: int

    def __post_init__(self):
        if self.y_b not in (0, 1):
            raise ConfigError(f"y_b must be 0 or 1, got {self.y_b}")
        if self.y_b == 0 and self.y_f < 0:
            raise ConfigError("foreground samples need a class index")

    def validate(self, n_classes):
        if self.y_f >= n_classes:
            raise ConfigError(f"y_f={self.y_f} outside 0..{n_classes - 1}")
        return self


@dataclass
class PairedSample:
    visual: VisualSample
    audio: AudioSample
    label: LabelPair
    visual_class: int
    audio_class: int

    def __post_init__(self):
        mismatched = self.visual_class != self.audio_class
        if mismatched != bool(self.label.y_b):
            raise ConfigError(
                f"y_b={self.label.y_b} disagrees with source classes "
                f"{self.visual_class}/{self.audio_class}"
            )
