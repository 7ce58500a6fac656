from ablations.base_suite import Suite, TrendCheck, Variant


class UnimodalSuite(Suite):
    """Single-modality evaluation of the multimodal model vs unimodally trained models."""

    def variants(self, config):
        return [
            Variant("multimodal/a", model="mavt", eval_modality="a"),
            Variant("multimodal/v", model="mavt", eval_modality="v"),
            Variant("unimodal/a", {"train_modality": "a"}, model="unimodal_mavt"),
            Variant("unimodal/v", {"train_modality": "v"}, model="unimodal_mavt"),
        ]

    def trends(self, table):
        checks = []
        for modality in ("a", "v"):
            multi = float(table.loc[f"multimodal/{modality}", "fg_acc"])
            single = float(table.loc[f"unimodal/{modality}", "fg_acc"])
            checks.append(
                TrendCheck(
                    name=f"fg_acc: multimodal/{modality} > unimodal/{modality}",
                    passed=multi > single,
                    detail=f"multimodal={multi:.4f}, unimodal={single:.4f}",
                )
            )
        return checks
