# Description: Configuration file for the project
#
from typing import Literal, Tuple

from pydantic import (
    AliasChoices,
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from utils.common import print_colored
from utils.errors import ConfigError

# Define the models that can be trained
models = [
    "mavt",
    "unimodal_mavt",
]

# Define the metrics reported by evaluation
metrics = [
    "fg_accuracy",
    "bg_accuracy",
    "retrieval_recall",
    "event_accuracy",
]

# Define the ablation suites
suites = [
    "tokens",
    "fg_mining",
    "blockwise",
    "unimodal",
]


def _parse_pair(value):
    if isinstance(value, str):
        parts = value.lower().replace(",", "x").split("x")
        if len(parts) != 2:
            raise ValueError(f"expected HxW, got {value!r}")
        return tuple(int(part) for part in parts)
    return value


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if len(value) == 2 and all(isinstance(v, int) for v in value):
            return f"{value[0]}x{value[1]}"
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# pylint: disable=too-many-instance-attributes
class RunConfig(BaseModel):
    """
    Flat run configuration merging the backbone, token, loss, data, trainer and
    tooling settings. Unknown keys are rejected; every key has a default.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(0, description="Base seed; every module seed derives from it")

    # Backbone
    d: int = Field(32, gt=0, description="Embedding width")
    depth: int = Field(4, ge=1, description="Number of frozen transformer blocks K")
    heads: int = Field(4, ge=1, description="Attention heads (backbone and LSA units)")
    mlp_ratio: int = Field(4, ge=1, description="MLP hidden width as a multiple of d")
    patch_size: int = Field(8, ge=1, description="Square patch side for both modalities")
    image_hw: Tuple[int, int] = Field((32, 32), description="Image height x width")
    spec_ft: Tuple[int, int] = Field((24, 32), description="Spectrogram frequency x time bins")
    pos_embed_len: int = Field(16, ge=2, description="Pretrained position-embedding length")
    separate_backbones: bool = Field(False, description="Separate audio/visual frozen backbones")

    # Tokens
    n_a: int = Field(5, ge=0, description="Audio unimodal prompt tokens")
    n_v: int = Field(5, ge=0, description="Visual unimodal prompt tokens")
    n_s: int = Field(5, ge=0, description="Shared multimodal prompt tokens")
    class_tokens: bool = Field(True, description="Background/foreground class tokens and heads")
    deep_prompts: bool = Field(False, description="Fresh prompt tokens at every block input")
    share_class_tokens: bool = Field(True, description="One z_b/z_f pair shared by both streams")
    use_lsa: bool = Field(True, description="Local self-attention units on prompt bags")

    # Losses
    n_classes: int = Field(8, ge=2, description="Foreground class count C")
    tau: float = Field(0.07, gt=0, description="Contrastive temperature")
    contrastive_weight: float = Field(1.0, ge=0, description="Weight of the summed block losses")
    # also read as eq9_mode
    bg_loss_mode: Literal["literal", "always_bg"] = Field(
        "literal",
        validation_alias=AliasChoices("bg_loss_mode", "eq9_mode"),
        description="literal: BCE on background samples only; always_bg: BCE on all",
    )
    blockwise: bool = Field(True, description="Contrast after every block (false: final only)")
    block_weights: Tuple[float, ...] = Field(
        (), description="Per-block contrastive weights, comma separated (empty: all ones)"
    )

    # Data
    noise_std: float = Field(0.1, ge=0, description="Gaussian noise added to prototypes")
    train_size: int = Field(5000, ge=1, description="Training samples (all foreground)")
    test_size: int = Field(500, ge=1, description="Test samples")
    mismatch_ratio: float = Field(0.25, ge=0, le=1, description="Mismatch pairs per train batch")
    test_mismatch_ratio: float = Field(
        0.2, ge=0, le=1, description="Background share of test split"
    )
    n_jobs: int = Field(1, description="Parallel workers for dataset generation")

    # Trainer
    model: Literal["mavt", "unimodal_mavt"] = Field("mavt", description="Model to train")
    train_modality: Literal["a", "v"] = Field("a", description="Modality of unimodal_mavt")
    batch_size: int = Field(32, ge=1, description="Training batch size B")
    epochs: int = Field(200, ge=1, description="Training epochs")
    lr: float = Field(1e-3, gt=0, description="Initial learning rate")
    lr_decay: float = Field(0.1, gt=0, description="Learning-rate multiplier per step period")
    lr_step: int = Field(30, ge=1, description="Epochs between learning-rate decays")
    beta1: float = Field(0.9, ge=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(0.999, ge=0, lt=1, description="Adam second-moment decay")
    adam_eps: float = Field(1e-8, gt=0, description="Adam denominator guard")
    eval_batch_size: int = Field(128, ge=1, description="Evaluation batch size")

    # Tooling
    ablation_seeds: int = Field(3, ge=1, description="Seeds averaged per ablation configuration")
    gradcheck_h: float = Field(1e-5, gt=0, description="Central-difference step")
    gradcheck_coords: int = Field(8, ge=1, description="Coordinates checked per trainable tensor")
    gradcheck_batch: int = Field(4, ge=2, description="Batch size of the whole-model check")

    @field_validator("image_hw", "spec_ft", mode="before")
    @classmethod
    def _pairs(cls, value):
        return _parse_pair(value)

    @field_validator("block_weights", mode="before")
    @classmethod
    def _weights(cls, value):
        if isinstance(value, str):
            return tuple(float(part) for part in value.split(",") if part.strip())
        return value

    @model_validator(mode="after")
    def _consistent(self):
        if self.d % self.heads:
            raise ValueError(f"heads={self.heads} must divide d={self.d}")
        if self.block_weights and len(self.block_weights) != self.depth:
            raise ValueError(
                f"block_weights has {len(self.block_weights)} entries, depth is {self.depth}"
            )
        return self

    @classmethod
    def build(cls, values=None):
        """Validate a mapping of (possibly string) values into a RunConfig."""
        try:
            return cls.model_validate(dict(values or {}))
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def parse(cls, text, overrides=None):
        """Parse flat `key = value` text; overrides win over file values."""
        values = {}
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {number}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.build(values)

    @classmethod
    def from_file(cls, path=None, overrides=None):
        """Load a config file (optional) and apply overrides."""
        text = ""
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as handle:
                    text = handle.read()
            except OSError as e:
                raise ConfigError(f"Cannot read config file {path}: {e}") from e
        return cls.parse(text, overrides)

    def dump(self) -> str:
        """Every key as `key = value`, one per line."""
        return "".join(
            f"{name} = {_format_value(getattr(self, name))}\n" for name in type(self).model_fields
        )

    def with_overrides(self, **overrides):
        values = self.model_dump()
        values.update(overrides)
        return type(self).build(values)

    @property
    def weights_per_block(self):
        return self.block_weights or (1.0,) * self.depth

    def display(self):
        """Prints out the current configuration."""
        print_colored("Run Configuration:", "info")
        for name in type(self).model_fields:
            print_colored(f"  {name}: {_format_value(getattr(self, name))}", "gray")


def describe_keys():
    """(key, default, description) for every configuration key."""
    defaults = RunConfig()
    return [
        (name, _format_value(getattr(defaults, name)), field.description or "")
        for name, field in RunConfig.model_fields.items()
    ]
