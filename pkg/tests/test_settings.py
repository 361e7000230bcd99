import os
from pathlib import Path
from unittest.mock import patch

import pytest

from src.settings import Settings, get_settings, update_settings


class TestSettings:
    """Test configuration loading."""

    def test_defaults(self):
        """Test the built-in defaults."""
        settings = Settings()
        assert settings.block_size == 4096
        assert settings.stehfest_order == 16
        assert settings.get_grid() == {"t_max": 10.0, "h": 0.01}

    @patch.dict(os.environ, {"SIM_SEED": "7", "GRID_H": "0.05", "OUTPUT_DIR": "results"})
    def test_from_env(self):
        """Test that environment variables override defaults."""
        settings = Settings.from_env()
        assert settings.seed == 7
        assert settings.h == 0.05
        assert settings.output_dir == Path("results")
        assert settings.get_sim()["seed"] == 7


class TestUpdateSettings:
    """Test overriding the global settings."""

    @patch("src.settings._settings", None)
    def test_update_known_field(self):
        """Test that a known field is overridden in place."""
        update_settings(workers=3, ks_alpha=0.05)
        assert get_settings().workers == 3
        assert get_settings().ks_alpha == 0.05

    @patch("src.settings._settings", None)
    def test_update_unknown_field(self):
        """Test that a misspelt field is rejected."""
        with pytest.raises(KeyError, match="Unknown settings"):
            update_settings(worker=3)
