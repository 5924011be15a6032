"""
Experiment configuration: flat key=value files plus command-line overrides.
Uses python-dotenv to read the files and pydantic to validate every key.
"""
from pathlib import Path
from typing import Dict, Literal, Sequence

from dotenv import dotenv_values
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.solver.config import parse_model
from src.utils.errors import InvalidConfigError


class ExperimentConfig(BaseModel):
    """One solver run: problem, solver, constants, reference and output."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Problem
    problem: Literal["laplacian", "synthetic"] = "laplacian"
    d: int = Field(default=3, ge=2, description="Tensor order")
    n: int = Field(default=4, ge=2, description="Mode size")
    h: float | None = Field(default=None, gt=0, description="Mesh width, default 1/(n+1)")
    kappa: float = Field(default=3.0, ge=1, description="Condition number of the synthetic operator")
    tree: Literal["linear", "balanced"] = "linear"
    rhs: Literal["ones", "random"] = "ones"

    # Solver
    solver: Literal["st", "ie", "apriori"] = "st"
    schedule_kind: Literal["algebraic", "exponential"] = "exponential"
    p: float | None = Field(default=None, gt=0, lt=2)
    c0: float = Field(default=1.0, gt=0)
    rho_tilde: float | None = Field(default=None, gt=0, lt=1)
    iterations: int = Field(default=30, gt=0, description="Steps of the a priori iteration")
    epsilon: float = Field(default=1e-4, gt=0)
    theta: float | None = None
    omega: float | None = None
    nu: float | None = None
    tau1: float | None = None
    tau2: float | None = None
    alpha0_factor: float = Field(default=0.5, gt=0)
    max_iter: int | None = Field(default=None, gt=0)

    # Reference and output
    reference: Literal["dense", "expsum", "none"] = "dense"
    expsum_terms: int | None = Field(default=None, ge=2)
    seed: int = 0
    timing: bool = False
    out_path: str | None = None

    @model_validator(mode="after")
    def _check_schedule(self) -> "ExperimentConfig":
        if self.solver == "apriori":
            if self.rho_tilde is None:
                raise ValueError("apriori solver needs rho_tilde")
            if self.schedule_kind == "algebraic" and self.p is None:
                raise ValueError("algebraic schedule needs p")
        return self

    def solver_overrides(self) -> Dict[str, float | int | None]:
        return dict(
            theta=self.theta, omega=self.omega, nu=self.nu,
            tau1=self.tau1, tau2=self.tau2, max_iter=self.max_iter,
        )


def parse_overrides(pairs: Sequence[str]) -> Dict[str, str]:
    """Turn ["key=value", ...] into a dict."""
    overrides = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            logger.error(f"Malformed override: {pair!r}")
            raise InvalidConfigError("--set", f"expected key=value, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def read_key_values(path: str | Path) -> Dict[str, str]:
    path = Path(path)
    if not path.is_file():
        logger.error(f"Config file not found: {path}")
        raise InvalidConfigError("config", f"no such file: {path}")
    return {k: v for k, v in dotenv_values(path).items() if v is not None and v != ""}


def build_experiment_config(values: Dict[str, str]) -> ExperimentConfig:
    cleaned = {k: v for k, v in values.items() if v is not None and v != ""}
    return parse_model(ExperimentConfig, cleaned)


def load_experiment_config(
    path: str | Path | None,
    overrides: Sequence[str] = (),
) -> ExperimentConfig:
    """
    Load and validate an experiment configuration.

    Args:
        path: key=value file (None for defaults only)
        overrides: "key=value" strings applied on top of the file

    Returns:
        Validated ExperimentConfig
    """
    values = read_key_values(path) if path is not None else {}
    values.update(parse_overrides(overrides))
    config = build_experiment_config(values)
    logger.info(f"Loaded experiment config: problem={config.problem}, d={config.d}, n={config.n}, solver={config.solver}")
    return config
