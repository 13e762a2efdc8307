"""Run configuration, scenarios, acceptance checks and the command line."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .plotdata import emit_plotdata
from .scenarios import RunOutcome, run_scenario

__all__ = ["ConfigError", "RunConfig", "RunOutcome", "emit_plotdata", "load_config", "parse_config",
           "run_scenario"]
