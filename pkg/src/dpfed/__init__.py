"""Differentially private resizing of padded intermediate results in a simulated data federation."""

from .budget import BudgetLedger, BudgetPlan, InsufficientBudget, Strategy
from .costmodel import CostProfile, PublicInfo, estimate_dag, model_operator_cost, model_plan_cost
from .execution import Policy, execute_dag, exec_operator, mparty_join_plan, resize
from .noise import RngSeed, laplace_output, tlap_mean, tlap_new, tlap_sample, tlap_tail_below
from .oracle import oracle_eval
from .planner import make_plan, plan_eager, plan_optimal, plan_oracle, plan_uniform
from .relational import Database, PaddedTable, Partition, QueryDag, Schema, build_dag, union_partitions
from .sensitivity import SensitivityConfig, operator_stability, propagate_sensitivity, tables_touched

__version__ = "0.1.0"

__all__ = [
    "BudgetLedger",
    "BudgetPlan",
    "CostProfile",
    "Database",
    "InsufficientBudget",
    "PaddedTable",
    "Partition",
    "Policy",
    "PublicInfo",
    "QueryDag",
    "RngSeed",
    "Schema",
    "SensitivityConfig",
    "Strategy",
    "build_dag",
    "estimate_dag",
    "exec_operator",
    "execute_dag",
    "laplace_output",
    "make_plan",
    "model_operator_cost",
    "model_plan_cost",
    "mparty_join_plan",
    "operator_stability",
    "oracle_eval",
    "plan_eager",
    "plan_optimal",
    "plan_oracle",
    "plan_uniform",
    "propagate_sensitivity",
    "resize",
    "tables_touched",
    "tlap_mean",
    "tlap_new",
    "tlap_sample",
    "tlap_tail_below",
    "union_partitions",
]
