# Description: Fixed constants of the audio-visual prompt-token model.
#
# User-facing knobs live in the top-level RunConfig; these are not meant to
# be changed per run.

# Standard deviation of learnable token, head and position-embedding init
INIT_STD = 0.02

# Hidden width of the background MLP head, as a multiple of d
BG_HIDDEN_RATIO = 4

# Image channels; spectrograms are replicated to this many channels
CHANNELS = 3

# Random-stream keys, one per initialised component
SEED_KEY_BACKBONE = 1
SEED_KEY_BACKBONE_AUDIO = 2
SEED_KEY_TOKENS = 3
SEED_KEY_HEADS = 4

# Modalities, visual first (order of the concatenated class-token features)
MODALITIES = ("v", "a")
