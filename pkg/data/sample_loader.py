import os

import numpy as np
import pandas as pd

from autograd.serialization import decode_record, encode_record
from data.configs import LABEL_HEADER, MANIFEST_NAME, SAMPLE_SUFFIX, SPLITS
from data.samples import AudioSample, LabelPair, PairedSample, VisualSample
from data.synthetic import PairedDataset
from utils.common import print_colored
from utils.errors import FormatError


class SampleLoader:
    """
    Reads and writes paired samples and dataset directories.

    One sample file is a label line `y_b,y_f,visual_class,audio_class` followed
    by a tensor record holding "visual" and "audio". A dataset directory holds
    `<root>/{train,test}/<idx>.mavt` plus a `manifest.csv` (idx,y_b,y_f) per split.
    """

    def __init__(self, debug=False):
        self.debug = debug

    @staticmethod
    def encode_sample(sample: PairedSample) -> bytes:
        label = sample.label
        line = f"{label.y_b},{label.y_f},{sample.visual_class},{sample.audio_class}\n"
        record = encode_record(
            {"visual": sample.visual.pixels, "audio": sample.audio.spectrogram}
        )
        return line.encode("ascii") + record

    @staticmethod
    def decode_sample(buffer) -> PairedSample:
        newline = buffer.find(b"\n")
        if newline < 0:
            raise FormatError("sample has no label line")
        try:
            fields = [int(v) for v in buffer[:newline].decode("ascii").split(",")]
        except (UnicodeDecodeError, ValueError) as e:
            raise FormatError(f"malformed label line, expected {LABEL_HEADER}") from e
        if len(fields) != 4:
            raise FormatError(f"label line has {len(fields)} fields, expected {LABEL_HEADER}")

        tensors, _ = decode_record(buffer, newline + 1)
        if "visual" not in tensors or "audio" not in tensors:
            raise FormatError("sample record needs 'visual' and 'audio' tensors")
        y_b, y_f, visual_class, audio_class = fields
        return PairedSample(
            visual=VisualSample(tensors["visual"]),
            audio=AudioSample(tensors["audio"]),
            label=LabelPair(y_b, y_f),
            visual_class=visual_class,
            audio_class=audio_class,
        )

    def save_sample(self, path, sample: PairedSample):
        with open(path, "wb") as handle:
            handle.write(self.encode_sample(sample))

    def load_sample(self, path) -> PairedSample:
        try:
            with open(path, "rb") as handle:
                return self.decode_sample(handle.read())
        except FormatError as e:
            raise FormatError(f"{path}: {e}") from e

    def save_split(self, root, split, dataset: PairedDataset):
        directory = os.path.join(root, split)
        os.makedirs(directory, exist_ok=True)
        for index in range(len(dataset)):
            path = os.path.join(directory, f"{index}{SAMPLE_SUFFIX}")
            self.save_sample(path, dataset.sample(index))
        manifest = pd.DataFrame(
            {"idx": np.arange(len(dataset)), "y_b": dataset.y_b, "y_f": dataset.y_f}
        )
        manifest.to_csv(os.path.join(directory, MANIFEST_NAME), index=False)
        if self.debug:
            print_colored(f"Wrote {len(dataset)} {split} samples to {directory}", "success")

    def save_dataset(self, root, synth):
        """Write both splits of a SynthDataset."""
        for split in SPLITS:
            self.save_split(root, split, getattr(synth, split))

    def load_split(self, root, split) -> PairedDataset:
        directory = os.path.join(root, split)
        manifest_path = os.path.join(directory, MANIFEST_NAME)
        try:
            manifest = pd.read_csv(manifest_path)
        except (FileNotFoundError, pd.errors.EmptyDataError, pd.errors.ParserError) as e:
            raise FormatError(f"Cannot read manifest {manifest_path}: {e}") from e
        if list(manifest.columns) != ["idx", "y_b", "y_f"]:
            raise FormatError(f"{manifest_path}: expected columns idx,y_b,y_f")

        samples = []
        for row in manifest.itertuples(index=False):
            sample = self.load_sample(os.path.join(directory, f"{row.idx}{SAMPLE_SUFFIX}"))
            if (sample.label.y_b, sample.label.y_f) != (row.y_b, row.y_f):
                raise FormatError(f"sample {row.idx} disagrees with the manifest")
            samples.append(sample)
        if self.debug:
            print_colored(f"Loaded {len(samples)} {split} samples from {directory}", "success")
        return PairedDataset.from_samples(samples)

    def load_dataset(self, root):
        """(train, test) PairedDatasets of a dataset directory."""
        return tuple(self.load_split(root, split) for split in SPLITS)
