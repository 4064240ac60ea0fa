from dataclasses import asdict, dataclass, field

import numpy as np

from explainer_app.exceptions import ConfigError
from explainer_app.models import ExclusionPolicy, RoundingRule, SearchStrategy, StopRule


@dataclass(frozen=True)
class RelaxOptConfig:
    learning_rate:    float = 0.3
    max_steps:        int = 300
    entropy_weight_a: float = 0.1
    entropy_weight_p: float = 0.1
    sharpness_stop:   float = 0.95
    # P-row entropies weighted by a_i; False penalizes every candidate row equally
    gate_p_entropy:   bool = True
    # lead: argmax gate cell only; row-best: score each row's alignment argmax as a discrete edit
    rounding:         str = RoundingRule.ROW_BEST

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive", field="learning_rate")
        if self.max_steps <= 0:
            raise ConfigError("max_steps must be positive", field="max_steps")
        if self.entropy_weight_a < 0 or self.entropy_weight_p < 0:
            raise ConfigError("entropy weights must be nonnegative", field="entropy_weight")
        if not 0 < self.sharpness_stop <= 1:
            raise ConfigError("sharpness_stop must lie in (0, 1]", field="sharpness_stop")
        if self.rounding not in RoundingRule.values:
            raise ConfigError(f"unknown rounding rule {self.rounding!r}", field="rounding")

    def as_dict(self):
        return {**asdict(self), "rounding": RoundingRule(self.rounding).value}


@dataclass(frozen=True)
class SearchConfig:
    exclusion_policy: str = ExclusionPolicy.QUERY_AND_DISTRACTOR
    max_edits:        int | None = None         # None means hw
    strategy:         str = SearchStrategy.EXHAUSTIVE
    stop_rule:        str = StopRule.ARGMAX
    relax:            RelaxOptConfig = field(default_factory=RelaxOptConfig)
    workers:          int = 1

    def __post_init__(self):
        if self.exclusion_policy not in ExclusionPolicy.values:
            raise ConfigError(f"unknown exclusion policy {self.exclusion_policy!r}", field="exclusion_policy")
        if self.strategy not in SearchStrategy.values:
            raise ConfigError(f"unknown strategy {self.strategy!r}", field="strategy")
        if self.stop_rule not in StopRule.values:
            raise ConfigError(f"unknown stop rule {self.stop_rule!r}", field="stop_rule")
        if self.max_edits is not None and self.max_edits <= 0:
            raise ConfigError("max_edits must be positive", field="max_edits")
        if self.workers <= 0:
            raise ConfigError("workers must be positive", field="workers")

    def edit_budget(self, cells):
        if self.max_edits is None:
            return cells
        if self.max_edits > cells:
            raise ConfigError(f"max_edits {self.max_edits} exceeds {cells} cells", field="max_edits")
        return self.max_edits

    def as_dict(self):
        data = asdict(self)
        data["exclusion_policy"] = str(self.exclusion_policy)
        data["strategy"] = str(self.strategy)
        data["stop_rule"] = str(self.stop_rule)
        return data


@dataclass(frozen=True)
class CandidateFilter:
    """Which (query cell, distractor cell) pairs may still be proposed."""

    query_cells:  frozenset = frozenset()
    source_cells: frozenset = frozenset()
    pairs:        frozenset = frozenset()

    def allowed(self, cells):
        mask = np.ones((cells, cells), dtype=bool)
        if self.query_cells:
            mask[sorted(self.query_cells), :] = False
        if self.source_cells:
            mask[:, sorted(self.source_cells)] = False
        for query_cell, source_cell in self.pairs:
            mask[query_cell, source_cell] = False
        return mask

    def after_edit(self, query_cell, source_cell, policy):
        """Filter for the next greedy step once ``(query_cell, source_cell)`` is applied."""
        sources = self.source_cells
        if policy == ExclusionPolicy.QUERY_AND_DISTRACTOR:
            sources = sources | {source_cell}
        return CandidateFilter(self.query_cells | {query_cell}, sources, self.pairs)

    @classmethod
    def only(cls, cells, query_cell, source_cell):
        """Every pair except one excluded."""
        pairs = frozenset((i, j) for i in range(cells) for j in range(cells)
                          if (i, j) != (query_cell, source_cell))
        return cls(pairs=pairs)
