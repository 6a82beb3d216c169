"""Exact Painleve test for coupled bosonic and fermionic evolution systems."""

from .engine import STATUSES, TestVerdict, exit_code, oracle_check, run_branch
from .ring import GaussianRational
from .system import BranchSeed, EvolutionSystem, UsageError, build_osp22, build_skdv, load_system

__all__ = [
    "BranchSeed",
    "EvolutionSystem",
    "GaussianRational",
    "STATUSES",
    "TestVerdict",
    "UsageError",
    "build_osp22",
    "build_skdv",
    "exit_code",
    "load_system",
    "oracle_check",
    "run_branch",
]
