import os
from dataclasses import dataclass
from typing import List

import pandas as pd

from ablations.base_suite import TrendCheck
from ablations.suite_factory import SuiteFactory
from data.synthetic import SynthSpec, gen_dataset
from models.model_factory import ModelFactory
from utils.common import print_colored

RESULT_COLUMNS = ["fg_acc", "bg_acc", "retrieval_r1", "event_acc"]


@dataclass
class AblationResult:
    suite: str
    table: pd.DataFrame  # seed means, one row per variant
    per_seed: pd.DataFrame
    trends: List[TrendCheck]

    @property
    def passed(self):
        return all(check.passed for check in self.trends)

    def trend_frame(self):
        return pd.DataFrame(
            [{"check": c.name, "passed": c.passed, "detail": c.detail} for c in self.trends]
        )


# pylint: disable=too-many-locals
def run_ablation(suite_name, config, out_dir=None, datasets=None, debug=False):
    """Train every variant of a suite for config.ablation_seeds seeds.

    Seeds are config.seed, config.seed + 1, ...; each seed gets its own
    synthetic dataset unless `datasets` maps seed -> (train, test).
    Writes <suite>.csv, <suite>_per_seed.csv and <suite>_trends.csv to out_dir.
    """
    suite = SuiteFactory(debug=debug).create_suite(suite_name)
    variants = suite.variants(config)
    factory = ModelFactory(debug=debug)

    rows = []
    for offset in range(config.ablation_seeds):
        seed = config.seed + offset
        if datasets is not None:
            train_set, test_set = datasets[seed]
        else:
            synth = gen_dataset(SynthSpec.from_config(config.with_overrides(seed=seed)))
            train_set, test_set = synth.train, synth.test

        trained = {}
        for variant in variants:
            key = variant.training_key()
            if key not in trained:
                print_colored(f"[{suite_name}] seed {seed}: training {variant.name}", "info")
                variant_config = config.with_overrides(
                    seed=seed, model=variant.model, **variant.overrides
                )
                model = factory.create_model(variant.model, variant_config)
                run_dir = None
                if out_dir:
                    label = variant.name.replace("/", "_")
                    run_dir = os.path.join(out_dir, suite_name, label, str(seed))
                model.train(train_set, test_set, out_dir=run_dir)
                trained[key] = model

            metrics = trained[key].evaluate(test_set, modality=variant.eval_modality)
            rows.append({"variant": variant.name, "seed": seed, **metrics})

    per_seed = pd.DataFrame(rows)[["variant", "seed"] + RESULT_COLUMNS]
    order = [variant.name for variant in variants]
    table = per_seed.groupby("variant", sort=False)[RESULT_COLUMNS].mean().reindex(order)
    result = AblationResult(suite_name, table, per_seed, suite.trends(table))

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, f"{suite_name}.csv"), index_label="variant")
        per_seed.to_csv(os.path.join(out_dir, f"{suite_name}_per_seed.csv"), index=False)
        result.trend_frame().to_csv(os.path.join(out_dir, f"{suite_name}_trends.csv"), index=False)

    for check in result.trends:
        print_colored(f"{check.name}: {check.detail}", "success" if check.passed else "error")
    return result
