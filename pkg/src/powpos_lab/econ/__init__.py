from powpos_lab.econ.costs import (
    DEFAULT_SHARES,
    CostRow,
    EconParams,
    cost_at_price,
    cost_row,
    cost_table,
    table_csv,
    table_json,
)
from powpos_lab.econ.figures import Figure, figure_csv, figure_data
from powpos_lab.econ.majority import (
    monte_carlo_majority,
    required_hash_ratio,
    stake_for_hash_share,
    vote_majority_prob,
)

__all__ = [
    "DEFAULT_SHARES",
    "CostRow",
    "EconParams",
    "cost_at_price",
    "cost_row",
    "cost_table",
    "table_csv",
    "table_json",
    "Figure",
    "figure_csv",
    "figure_data",
    "monte_carlo_majority",
    "required_hash_ratio",
    "stake_for_hash_share",
    "vote_majority_prob",
]
