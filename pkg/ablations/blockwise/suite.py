from ablations.base_suite import Suite, Variant, ordered_check

ORDER = ["blockwise", "final_block", "no_scl"]


class BlockwiseSuite(Suite):
    """Contrastive alignment after every block, after the last only, or not at all."""

    def variants(self, config):
        return [
            Variant("blockwise", {"blockwise": True}),
            Variant("final_block", {"blockwise": False}),
            Variant("no_scl", {"contrastive_weight": 0.0}),
        ]

    def trends(self, table):
        return [
            ordered_check(table, ORDER, "fg_acc", strict=False),
            ordered_check(table, ORDER, "retrieval_r1", strict=False),
        ]
