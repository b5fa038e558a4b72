import json
import logging
from pathlib import Path
from typing import Dict, Any, Optional

from . import constants

logger = logging.getLogger(__name__)


class ConfigManager:
    """Manages solver defaults, persisted as JSON.

    Precedence is CLI flag > config file > ``DEFAULT_CONFIG``.
    """

    DEFAULT_CONFIG = {
        # Generator physics
        "e_cap": constants.DEFAULT_E_CAP,
        "dt_hours": constants.DEFAULT_DT_HOURS,
        "levels": constants.DEFAULT_LEVELS,
        "charge_levels": constants.DEFAULT_CHARGE_LEVELS,
        "alpha": constants.DEFAULT_ALPHA,
        "c_uncov": constants.DEFAULT_C_UNCOV,
        # Column generation
        "colgen_max_iterations": constants.DEFAULT_MAX_ITERATIONS,
        "colgen_max_wall_s": constants.DEFAULT_MAX_WALL_S,
        "reduced_cost_tol": constants.DEFAULT_REDUCED_COST_TOL,
        "lp_pivot_rule": "bland",
        # Wall budget of column generation and master together (None: unlimited)
        "solve_budget_s": constants.DEFAULT_SOLVE_BUDGET_S,
        # Master solvers
        "sa_sweeps": 200,
        "sa_restarts": 20,
        "tabu_max_iterations": None,  # None means derive from problem size
        "tabu_restarts": 10,
        "fa_sweeps": 200,
        "fa_restarts": 20,
        "exact_time_limit_s": 300.0,
        # Enumeration guards
        "path_limit": constants.DEFAULT_PATH_LIMIT,
        "oracle_max_assignments": constants.DEFAULT_ORACLE_MAX_ASSIGNMENTS,
        # Bench
        "bench_workers": 4,
    }

    def __init__(self, app_name: str = "evfleet", config_file: Optional[Path] = None):
        self.config_dir = Path.home() / f".{app_name}"
        self.config_file = Path(config_file) if config_file else self.config_dir / "config.json"
        self._config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        """Load config from file or return defaults."""
        if not self.config_file.exists():
            logger.info(f"[CONFIG] Config file does not exist, using defaults: {self.config_file}")
            return self.DEFAULT_CONFIG.copy()

        try:
            with open(self.config_file, "r") as f:
                saved_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"[CONFIG] Error loading config: {e}")
            return self.DEFAULT_CONFIG.copy()

        unknown = sorted(set(saved_config) - set(self.DEFAULT_CONFIG))
        if unknown:
            logger.warning(f"[CONFIG] Ignoring unknown keys: {unknown}")
        # Merge with defaults to ensure all keys exist
        config = self.DEFAULT_CONFIG.copy()
        config.update({k: v for k, v in saved_config.items() if k in self.DEFAULT_CONFIG})
        logger.info(f"[CONFIG] Loaded config from: {self.config_file}")
        return config

    def save_config(self):
        """Save current config to file."""
        self.config_file.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(self.config_file, "w") as f:
                json.dump(self._config, f, indent=4)
            logger.info(f"[CONFIG] Config saved to {self.config_file}")
        except OSError as e:
            logger.error(f"[CONFIG] Error saving config: {e}")

    def get(self, key: str, default: Any = None) -> Any:
        return self._config.get(key, default)

    def set(self, key: str, value: Any):
        if key not in self.DEFAULT_CONFIG:
            raise KeyError(f"Unknown config key: {key}")
        self._config[key] = value
        self.save_config()

    def override(self, **values: Any) -> None:
        """Apply non-None CLI overrides for this process only (not saved)."""
        for key, value in values.items():
            if value is None:
                continue
            if key not in self.DEFAULT_CONFIG:
                raise KeyError(f"Unknown config key: {key}")
            self._config[key] = value

    @property
    def reduced_cost_tol(self) -> float:
        return float(self._config.get("reduced_cost_tol", constants.DEFAULT_REDUCED_COST_TOL))

    @property
    def lp_pivot_rule(self) -> str:
        return self._config.get("lp_pivot_rule", "bland")

    @property
    def solve_budget_s(self) -> Optional[float]:
        budget = self._config.get("solve_budget_s", constants.DEFAULT_SOLVE_BUDGET_S)
        return None if budget is None else float(budget)

    @property
    def path_limit(self) -> int:
        return int(self._config.get("path_limit", constants.DEFAULT_PATH_LIMIT))

    @property
    def bench_workers(self) -> int:
        return int(self._config.get("bench_workers", 4))
