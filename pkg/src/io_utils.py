import logging
from pathlib import Path

import pandas as pd
from pydantic import BaseModel

from .applications import GeigerModel, RedundantModel, SsqsModel
from .distributions import (
    Deterministic,
    Erlang,
    Exponential,
    ScalarDistribution,
    Tabulated,
    Uniform,
)
from .models.requests import (
    GeigerSpec,
    IndependentSpec,
    MinThresholdSpec,
    RaceStepSpec,
    RedundantSpec,
    Scenario,
    ShiftedMinSpec,
    SsqsSpec,
    TabulatedSpec,
)
from .steplaw import Independent, JointStepLaw, MinThreshold, RaceStep, ShiftedMin
from .volterra import SurvivalCurve

logger = logging.getLogger(__name__)


def read_scenario(path: Path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        pydantic.ValidationError: If the JSON is malformed or fails the schema
    """
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")

    logger.info(f"Reading scenario from: {path}")
    scenario = Scenario.model_validate_json(path.read_text(encoding="utf-8"))
    logger.info(f"Scenario target: {scenario.target}, outputs: {scenario.outputs}")
    return scenario


def read_tabulated_csv(path: Path) -> Tabulated:
    """Read a tabulated CDF from a CSV file with columns t and cdf.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If required columns are missing
    """
    if not path.exists():
        raise FileNotFoundError(f"Tabulated law file not found: {path}")

    df = pd.read_csv(path)
    missing_columns = [col for col in ("t", "cdf") if col not in df.columns]
    if missing_columns:
        raise ValueError(
            f"Missing required columns: {missing_columns}. Available columns: {list(df.columns)}"
        )
    df = df.dropna(subset=["t", "cdf"])
    logger.info(f"Loaded {len(df)} tabulated CDF points from {path}")
    return Tabulated(tuple(df["t"].astype(float)), tuple(df["cdf"].astype(float)))


def build_distribution(spec, base_dir: Path = Path(".")) -> ScalarDistribution:
    """Turn a validated distribution spec into a distribution object."""
    if isinstance(spec, TabulatedSpec):
        if spec.path is not None:
            path = Path(spec.path)
            return read_tabulated_csv(path if path.is_absolute() else base_dir / path)
        return Tabulated(tuple(spec.grid), tuple(spec.cdf))
    builders = {
        "exponential": lambda s: Exponential(s.rate),
        "deterministic": lambda s: Deterministic(s.value),
        "uniform": lambda s: Uniform(s.lo, s.hi),
        "erlang": lambda s: Erlang(s.shape, s.rate),
    }
    return builders[spec.kind](spec)


def build_law(spec, base_dir: Path = Path(".")) -> JointStepLaw:
    def dist(part):
        return build_distribution(part, base_dir)

    if isinstance(spec, IndependentSpec):
        return Independent(dist(spec.zeta), spec.q)
    if isinstance(spec, MinThresholdSpec):
        return MinThreshold(dist(spec.tau), dist(spec.eta))
    if isinstance(spec, RaceStepSpec):
        return RaceStep(dist(spec.tau), dist(spec.eta))
    if isinstance(spec, ShiftedMinSpec):
        return ShiftedMin(dist(spec.tau), dist(spec.eta), dist(spec.shift))
    raise ValueError(f"Unknown coupling: {spec!r}")


def build_model(spec, base_dir: Path = Path(".")) -> GeigerModel | RedundantModel | SsqsModel:
    if isinstance(spec, GeigerSpec):
        arrivals = build_distribution(spec.arrivals, base_dir) if spec.arrivals else None
        return GeigerModel(spec.lam, build_distribution(spec.lock, base_dir), arrivals)
    if isinstance(spec, RedundantSpec):
        return RedundantModel(spec.lam, spec.lam_prime, build_distribution(spec.repair, base_dir))
    if isinstance(spec, SsqsSpec):
        return SsqsModel(spec.lam, build_distribution(spec.service, base_dir))
    raise ValueError(f"Unknown model: {spec!r}")


def write_curve(curve: SurvivalCurve, path: Path, fmt: str = "csv") -> None:
    """Write a survival curve as t,survival rows (CSV) or records (JSON).

    Args:
        curve: Curve to write
        path: Output file path
        fmt: ``csv`` or ``json``
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    df = curve.to_frame()
    logger.info(f"Writing {len(df)} curve nodes to: {path}")

    try:
        if fmt == "json":
            df.to_json(path, orient="records", double_precision=12, indent=2)
        elif fmt == "csv":
            df.to_csv(path, index=False, float_format="%.12g")
        else:
            raise ValueError(f"Unknown output format: {fmt}")
    except Exception as e:
        logger.error(f"Error writing curve file {path}: {e}")
        raise


def write_json(model: BaseModel, path: Path) -> None:
    """Write a response model as indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")
