import json
import math
from pathlib import Path
from typing import Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from errors import DomainError


class EngineConfig(BaseModel):
    """Tunable numerical knobs shared by the CLI, the HTTP layer and the tests"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Fourier route for the vacuum integrals
    fourier_depth: int = Field(30, ge=1)          # J_p, factors in the infinite product
    p_max: float = Field(2 * math.pi * 512, gt=0)
    quad_nodes: int = Field(32, ge=4)             # Gauss-Legendre nodes per panel of width pi
    norm_tolerance: float = Field(1e-3, gt=0)     # allowed |<s,s> - 1| before giving up
    tail_tolerance: float = Field(1e-5, gt=0)     # allowed relative change of A, B when p_max doubles

    # Similarity flow
    flow_rtol: float = Field(1e-9, gt=0)
    flow_atol: float = Field(1e-12, gt=0)
    flow_max_steps: int = Field(200000, ge=1)

    # Brute-force oracle
    oracle_level: int = Field(14, ge=0)

    # Connection-coefficient memo, per engine
    query_cache_size: int = Field(100000, ge=1)

    # Okubo fixed point
    okubo_max_iter: int = Field(200, ge=1)
    okubo_tol: float = Field(1e-13, gt=0)

    # Renormalization-group linear systems
    lstsq_residual: float = Field(1e-10, gt=0)


DEFAULT_CONFIG = EngineConfig()


def load_config(path: Optional[Union[str, Path]] = None) -> EngineConfig:
    """Load JSON overrides on top of the defaults"""
    if path is None:
        return DEFAULT_CONFIG

    config_path = Path(path)
    if not config_path.exists():
        raise DomainError(f"Config file not found: {config_path}")

    with open(config_path, 'r') as f:
        try:
            overrides = json.load(f)
        except json.JSONDecodeError as e:
            raise DomainError(f"Config file {config_path} is not valid JSON: {e}")

    if not isinstance(overrides, dict):
        raise DomainError(f"Config file {config_path} must hold a JSON object")

    try:
        return EngineConfig(**{**DEFAULT_CONFIG.model_dump(), **overrides})
    except ValueError as e:
        raise DomainError(f"Invalid config {config_path}: {e}")
