# Description: Configuration file for the token-combination ablation.

# Prompt tokens per bag when a bag is switched on
TOKENS_PER_BAG = 5

# Bag combinations (audio, visual, shared) in decreasing expected accuracy
COMBINATIONS = {
    "a+v+s": (True, True, True),
    "a+v": (True, True, False),
    "s": (False, False, True),
    "a": (True, False, False),
    "v": (False, True, False),
}
EXPECTED_ORDER = ["a+v+s", "a+v", "s", "a"]
