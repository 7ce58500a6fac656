from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd


@dataclass
class Variant:
    """One configuration of an ablation suite.

    Variants with the same model and overrides share one trained model per
    seed; `eval_modality` picks av (None), a or v evaluation.
    """

    name: str
    overrides: Dict[str, object] = field(default_factory=dict)
    model: str = "mavt"
    eval_modality: Optional[str] = None

    def training_key(self):
        return (self.model, tuple(sorted(self.overrides.items())))


@dataclass
class TrendCheck:
    name: str
    passed: bool
    detail: str


def ordered_check(table, names, column, strict=True):
    """TrendCheck that table[column] decreases along `names`."""
    values = [float(table.loc[name, column]) for name in names]
    pairs = list(zip(values, values[1:]))
    passed = all(a > b if strict else a >= b for a, b in pairs)
    relation = " > " if strict else " >= "
    detail = relation.join(f"{name}={value:.4f}" for name, value in zip(names, values))
    return TrendCheck(name=f"{column}: {relation.join(names)}", passed=passed, detail=detail)


class Suite(ABC):
    """Base class for ablation suites: a list of variants and their expected trends."""

    def __init__(self, debug=False):
        self.debug = debug

    @abstractmethod
    def variants(self, config) -> List[Variant]:
        """Configurations trained under identical seeds and epoch counts."""

    @abstractmethod
    def trends(self, table: pd.DataFrame) -> List[TrendCheck]:
        """Directional checks over the seed-averaged table indexed by variant."""
