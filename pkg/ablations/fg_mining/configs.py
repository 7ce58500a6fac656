# Description: Configuration file for the foreground-mining ablation.

# Mismatch ratio of training batches with mining switched on
MINING_RATIO = 0.25

# Minimum absolute bg accuracy gain expected from mining
MIN_BG_GAIN = 0.05
