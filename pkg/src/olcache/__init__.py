"""No-regret online caching: OGA for a single cache, BSA for bipartite cache
networks, classical baselines, request generators and regret bounds."""

__version__ = "0.1.0"

from .core import (
    CacheVector,
    Catalog,
    ConfigError,
    InputError,
    NumericError,
    ParseError,
    RegretLedger,
    Request,
    ledger_record,
    slot_utility,
)
from .projection import project_capped_simplex, project_oracle

__all__ = [
    "CacheVector",
    "Catalog",
    "ConfigError",
    "InputError",
    "NumericError",
    "ParseError",
    "RegretLedger",
    "Request",
    "ledger_record",
    "slot_utility",
    "project_capped_simplex",
    "project_oracle",
]
