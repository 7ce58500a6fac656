from ablations.base_suite import Suite, TrendCheck, Variant, ordered_check
from ablations.tokens.configs import COMBINATIONS, EXPECTED_ORDER, TOKENS_PER_BAG

# Unimodal, shared and combined prompt bags, each with and without local
# self-attention. Trained on the classification loss alone.


def _name(combination, use_lsa):
    return f"{combination}/{'lsa' if use_lsa else 'no_lsa'}"


class TokensSuite(Suite):
    """Token-bag combinations with and without LSA."""

    def variants(self, config):
        variants = []
        for combination, (audio, visual, shared) in COMBINATIONS.items():
            for use_lsa in (True, False):
                overrides = {
                    "n_a": TOKENS_PER_BAG if audio else 0,
                    "n_v": TOKENS_PER_BAG if visual else 0,
                    "n_s": TOKENS_PER_BAG if shared else 0,
                    "use_lsa": use_lsa,
                    "contrastive_weight": 0.0,
                }
                variants.append(Variant(name=_name(combination, use_lsa), overrides=overrides))
        return variants

    def trends(self, table):
        checks = [ordered_check(table, [_name(c, True) for c in EXPECTED_ORDER], "fg_acc")]
        for combination in COMBINATIONS:
            with_lsa = float(table.loc[_name(combination, True), "fg_acc"])
            without = float(table.loc[_name(combination, False), "fg_acc"])
            checks.append(
                TrendCheck(
                    name=f"fg_acc: {combination} lsa >= no_lsa",
                    passed=with_lsa >= without,
                    detail=f"lsa={with_lsa:.4f}, no_lsa={without:.4f}",
                )
            )
        return checks
