# Description: Constants of the training loop.

# File names written into a training output directory
CHECKPOINT_NAME = "checkpoint.mavt"
METRICS_NAME = "metrics.csv"
DIAGNOSTICS_NAME = "diagnostics.json"

# Column order of the per-epoch metrics CSV
METRICS_COLUMNS = [
    "epoch",
    "lr",
    "loss_total",
    "loss_bf",
    "loss_cnt_sum",
    "fg_acc",
    "bg_acc",
    "retrieval_r1",
]

# Seed keys of the trainer's random streams
SEED_KEY_SHUFFLE = 20
SEED_KEY_MISMATCH = 21
