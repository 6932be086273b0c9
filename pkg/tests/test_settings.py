"""
Tests for settings, log levels and small helpers
"""
import json
import logging
import math
from datetime import datetime

import pytest

from log_config import logger, set_level
from settings import Settings
from utils import complex_key, fit_slope, l1, mode_ball, parse_since


@pytest.fixture
def config_path(tmp_path):
    return str(tmp_path / 'config.json')


class TestSettings:
    def test_defaults_are_written(self, config_path):
        settings = Settings(config_path)
        with open(config_path) as f:
            assert json.load(f) == Settings.DEFAULT_SETTINGS
        assert settings.n_min == -6
        assert settings.vmax == 3
        assert settings.precision == 'double'

    def test_partial_file_is_merged(self, config_path):
        with open(config_path, 'w') as f:
            json.dump({'vmax': 2, 'eps0': 0.02}, f)
        settings = Settings(config_path)
        assert settings.vmax == 2
        assert settings.eps0 == 0.02
        assert settings.m_max_iterations == 12

    def test_phi_grid_in_radians(self, config_path):
        assert Settings(config_path).phi_grid == pytest.approx([math.pi / 4, math.pi / 2, 3 * math.pi / 4])

    def test_setters_persist(self, config_path):
        settings = Settings(config_path)
        settings.vmax = 4
        settings.n_min = -8
        settings.precision = 'extended'
        reloaded = Settings(config_path)
        assert (reloaded.vmax, reloaded.n_min, reloaded.precision) == (4, -8, 'extended')

    @pytest.mark.parametrize("name,value", [
        ('vmax', 0),
        ('n_min', -13),
        ('n_min', 1),
        ('precision', 'quad'),
        ('psi_grid_exponent', 0),
    ])
    def test_setters_validate(self, config_path, name, value):
        settings = Settings(config_path)
        with pytest.raises(ValueError):
            setattr(settings, name, value)
        assert Settings(config_path).get(name) == Settings.DEFAULT_SETTINGS[name]


class TestLogLevel:
    def test_set_level(self):
        previous = logger.level
        try:
            set_level('debug')
            assert logger.level == logging.DEBUG
            with pytest.raises(ValueError):
                set_level('chatty')
        finally:
            logger.setLevel(previous)


class TestUtils:
    def test_parse_since(self):
        assert parse_since("1 Oct 2026") == datetime(2026, 10, 1)
        assert parse_since("2026-10-01 12:30") == datetime(2026, 10, 1, 12, 30)

    def test_fit_slope(self):
        assert fit_slope([1.0, 10.0, 100.0], [3.0, 300.0, 30000.0]) == pytest.approx(2.0)

    def test_mode_ball(self):
        assert set(mode_ball(2, 1)) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
        assert len(mode_ball(2, 2, include_zero=True)) == 13
        assert mode_ball(2, -1) == ()
        assert all(l1(nu) <= 3 for nu in mode_ball(3, 3))

    def test_complex_key(self):
        assert complex_key(0.1) == complex_key(0.1 + 0j)
        assert complex_key(0.1) != complex_key(0.1 + 1e-15)
