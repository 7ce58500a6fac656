# Description: Constants of the synthetic audio-visual data generator.

CHANNELS = 3  # Visual channels; spectrograms are replicated to this count
COSINES_PER_PROTOTYPE = 3  # Random 2-D cosines summed into one class field
MAX_FREQUENCY = 3  # Highest cycles per field along either axis
MIN_AMPLITUDE = 0.5
MAX_AMPLITUDE = 1.0
PROTOTYPE_SEPARATION = 10.0  # Min prototype L2 distance in units of noise_std

# Seed keys of the generator's random streams
SEED_KEY_PROTOTYPES = 10
SEED_KEY_TRAIN = 11
SEED_KEY_TEST = 12
SEED_KEY_BACKGROUND = 13

SPLITS = ("train", "test")
SAMPLE_SUFFIX = ".mavt"
MANIFEST_NAME = "manifest.csv"
LABEL_HEADER = "y_b,y_f,visual_class,audio_class"

# Spectrogram front end the synthetic spectrograms stand in for (not computed here)
STFT_WINDOW = 512
STFT_OVERLAP = 353
