# Description: Configuration file for the cross-modal retrieval metric.

# A query counts as a hit when its true partner is within the top K candidates
TOP_K = 1
