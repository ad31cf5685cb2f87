"""Monte-Carlo simulator and fairness scheduler for user-centric cell-free
massive MIMO networks."""

__version__ = "0.1.0"

from .config import ConfigError, SimConfig, parse_config_file  # noqa: F401
from .harness import ThroughputReport, export_report, run_simulation  # noqa: F401
