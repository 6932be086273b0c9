"""
Configuration settings for the Lindstedt series engine
"""
import json
import math
import os
from typing import Any, Dict, List


class Settings:
    DEFAULT_SETTINGS = {
        'zero_tolerance': 1e-12,      # gradient test, relative to max |c_{0,mu}||mu|
        'solver_tolerance': 1e-10,    # alpha average test, relative to the order's coefficients
        'diophantine_nmax': 200,
        'n_min': -6,
        'scale_floor': -12,
        'gamma_grid': 1024,
        'vmax': 3,
        'm_tolerance': 1e-12,
        'm_max_iterations': 12,
        'condition_threshold': 1e12,
        'localize_step': 1e-3,
        'eps0': 0.05,
        'phi_grid_over_pi': [0.25, 0.5, 0.75],
        'cusp_offsets': [0.02, 0.03, 0.05, 0.08, 0.12, 0.2, 0.3],
        'arc_samples': 9,
        'psi_grid_exponent': 6,
        'precision': 'double',
        'report_digits': 17,
        'seed': 0,
        'database': 'lindstedt_runs.db',
        'log_level': 'INFO',
    }

    def __init__(self, config_file: str = 'config.json'):
        self.config_file = config_file
        self.settings = self._load_settings()

    def _load_settings(self) -> Dict[str, Any]:
        """Load settings from config file or create with defaults"""
        if os.path.exists(self.config_file):
            with open(self.config_file, 'r') as f:
                stored = json.load(f)
            merged = self.DEFAULT_SETTINGS.copy()
            merged.update(stored)
            return merged
        else:
            self._save_settings(self.DEFAULT_SETTINGS)
            return self.DEFAULT_SETTINGS.copy()

    def _save_settings(self, settings: Dict[str, Any]):
        """Save settings to config file"""
        with open(self.config_file, 'w') as f:
            json.dump(settings, indent=2, fp=f)

    def get(self, key: str, default=None):
        """Get a setting value"""
        return self.settings.get(key, default)

    def set(self, key: str, value: Any):
        """Set a setting value and save"""
        self.settings[key] = value
        self._save_settings(self.settings)

    @property
    def zero_tolerance(self) -> float:
        return float(self.settings.get('zero_tolerance', 1e-12))

    @property
    def solver_tolerance(self) -> float:
        return float(self.settings.get('solver_tolerance', 1e-10))

    @property
    def diophantine_nmax(self) -> int:
        return int(self.settings.get('diophantine_nmax', 200))

    @property
    def n_min(self) -> int:
        """Deepest scale of the gamma sequence"""
        return int(self.settings.get('n_min', -6))

    @n_min.setter
    def n_min(self, value: int):
        if self.scale_floor <= value <= 0:
            self.set('n_min', value)
        else:
            raise ValueError(f"n_min must be between {self.scale_floor} and 0")

    @property
    def scale_floor(self) -> int:
        return int(self.settings.get('scale_floor', -12))

    @property
    def gamma_grid(self) -> int:
        return int(self.settings.get('gamma_grid', 1024))

    @property
    def vmax(self) -> int:
        """Largest self-energy skeleton kept in the catalog"""
        return int(self.settings.get('vmax', 3))

    @vmax.setter
    def vmax(self, value: int):
        if value >= 1:
            self.set('vmax', value)
        else:
            raise ValueError("vmax must be at least 1")

    @property
    def m_tolerance(self) -> float:
        return float(self.settings.get('m_tolerance', 1e-12))

    @property
    def m_max_iterations(self) -> int:
        return int(self.settings.get('m_max_iterations', 12))

    @property
    def condition_threshold(self) -> float:
        return float(self.settings.get('condition_threshold', 1e12))

    @property
    def localize_step(self) -> float:
        return float(self.settings.get('localize_step', 1e-3))

    @property
    def eps0(self) -> float:
        return float(self.settings.get('eps0', 0.05))

    @property
    def phi_grid(self) -> List[float]:
        """Half-opening angles of the probed sectors, in radians"""
        return [math.pi * float(v) for v in self.settings.get('phi_grid_over_pi', [0.25, 0.5, 0.75])]

    @property
    def cusp_offsets(self) -> List[float]:
        return [float(v) for v in self.settings.get('cusp_offsets', [])]

    @property
    def arc_samples(self) -> int:
        return int(self.settings.get('arc_samples', 9))

    @property
    def psi_grid_exponent(self) -> int:
        return int(self.settings.get('psi_grid_exponent', 6))

    @psi_grid_exponent.setter
    def psi_grid_exponent(self, value: int):
        if 1 <= value <= 12:
            self.set('psi_grid_exponent', value)
        else:
            raise ValueError("psi_grid_exponent must be between 1 and 12")

    @property
    def precision(self) -> str:
        return self.settings.get('precision', 'double')

    @precision.setter
    def precision(self, value: str):
        if value in ('double', 'extended'):
            self.set('precision', value)
        else:
            raise ValueError("precision must be 'double' or 'extended'")

    @property
    def report_digits(self) -> int:
        return int(self.settings.get('report_digits', 17))

    @property
    def seed(self) -> int:
        return int(self.settings.get('seed', 0))

    @property
    def database(self) -> str:
        return self.settings.get('database', 'lindstedt_runs.db')

    @property
    def log_level(self) -> str:
        return self.settings.get('log_level', 'INFO')


if __name__ == "__main__":
    settings = Settings()
    print(f"Scale sequence depth: {settings.n_min}")
    print(f"Catalog size limit: {settings.vmax}")
    print(f"Precision: {settings.precision}")
