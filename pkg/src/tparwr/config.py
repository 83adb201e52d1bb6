# Copyright (c) NXAI GmbH.

from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Run defaults, overridable through ``TPARWR_*`` environment variables."""

    model_config = SettingsConfigDict(env_prefix="TPARWR_")

    restart_prob: float = 0.15
    tolerance: float = 1e-9
    family_end: int = 5
    stranger_start: int = 10
    dangling_policy: Literal["self_loop", "uniform", "drop"] = "self_loop"

    threads: int = 1
    backend: Literal["numpy", "torch"] = "numpy"

    num_seeds: int = 30
    rng_seed: int = 0
    sample_size: int = 1000
    top_k: tuple[int, ...] = (100, 500, 1000)

    log_level: str = "INFO"
