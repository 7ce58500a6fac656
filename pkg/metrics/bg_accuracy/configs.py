# Description: Configuration file for the background accuracy metric.

# Probability at or above which a pair is called background
BG_THRESHOLD = 0.5
