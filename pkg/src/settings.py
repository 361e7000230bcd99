import os
from dataclasses import dataclass, fields
from pathlib import Path

from dotenv import load_dotenv


@dataclass
class Settings:
    """Application configuration settings."""

    # Simulation settings
    seed: int = 20240917
    sim_n: int = 100_000
    block_size: int = 4096
    workers: int = 1
    max_steps: int = 10**9

    # Survival grid
    t_max: float = 10.0
    h: float = 0.01

    # Numerics
    stehfest_order: int = 16
    quad_abs_tol: float = 1e-10
    tail_cutoff: float = 1e-16

    # Comparison thresholds
    ks_alpha: float = 0.01
    z_threshold: float = 4.0

    # Data directories
    data_dir: Path = Path("data")
    output_dir: Path = Path("outputs")
    log_file: str = "random_sums.log"

    @classmethod
    def from_env(cls) -> "Settings":
        """Create settings from environment variables."""
        return cls(
            seed=int(os.getenv("SIM_SEED", "20240917")),
            sim_n=int(os.getenv("SIM_N", "100000")),
            block_size=int(os.getenv("SIM_BLOCK_SIZE", "4096")),
            workers=int(os.getenv("SIM_WORKERS", "1")),
            max_steps=int(os.getenv("SIM_MAX_STEPS", str(10**9))),
            t_max=float(os.getenv("GRID_T_MAX", "10.0")),
            h=float(os.getenv("GRID_H", "0.01")),
            stehfest_order=int(os.getenv("STEHFEST_ORDER", "16")),
            quad_abs_tol=float(os.getenv("QUAD_ABS_TOL", "1e-10")),
            tail_cutoff=float(os.getenv("TAIL_CUTOFF", "1e-16")),
            ks_alpha=float(os.getenv("KS_ALPHA", "0.01")),
            z_threshold=float(os.getenv("Z_THRESHOLD", "4.0")),
            data_dir=Path(os.getenv("DATA_DIR", "data")),
            output_dir=Path(os.getenv("OUTPUT_DIR", "outputs")),
            log_file=os.getenv("LOG_FILE", "random_sums.log"),
        )

    def get_grid(self) -> dict[str, float]:
        """Get the default survival grid as a dictionary."""
        return {"t_max": self.t_max, "h": self.h}

    def get_sim(self) -> dict[str, int]:
        """Get the default simulation size and seed as a dictionary."""
        return {"n": self.sim_n, "seed": self.seed}


_settings: Settings | None = None


def get_settings() -> Settings:
    """Load settings once, reading a .env file if present."""
    global _settings
    if _settings is None:
        load_dotenv()
        _settings = Settings.from_env()
    return _settings


def update_settings(**kwargs) -> Settings:
    """Override fields of the global settings; unknown names raise KeyError."""
    settings = get_settings()
    known = {f.name for f in fields(settings)}
    unknown = sorted(set(kwargs) - known)
    if unknown:
        raise KeyError(f"Unknown settings: {unknown}")
    for key, value in kwargs.items():
        setattr(settings, key, value)
    return settings
