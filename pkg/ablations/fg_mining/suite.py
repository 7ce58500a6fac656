from ablations.base_suite import Suite, TrendCheck, Variant
from ablations.fg_mining.configs import MIN_BG_GAIN, MINING_RATIO


class FgMiningSuite(Suite):
    """Training with and without synthetic mismatch pairs, BCE on every sample."""

    def variants(self, config):
        return [
            Variant("mining", {"mismatch_ratio": MINING_RATIO, "bg_loss_mode": "always_bg"}),
            Variant("no_mining", {"mismatch_ratio": 0.0, "bg_loss_mode": "always_bg"}),
        ]

    def trends(self, table):
        mining = float(table.loc["mining", "bg_acc"])
        plain = float(table.loc["no_mining", "bg_acc"])
        return [
            TrendCheck(
                name=f"bg_acc: mining - no_mining > {MIN_BG_GAIN}",
                passed=mining - plain > MIN_BG_GAIN,
                detail=f"mining={mining:.4f}, no_mining={plain:.4f}",
            )
        ]
