"""
Typed configuration of the thresholded Richardson solvers.
Uses pydantic models so that every constant is range-checked on construction.
"""
from typing import Any, Literal

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.operators.kron_sum import SpectrumBounds
from src.utils.errors import InvalidConfigError, ScheduleKindError


def default_tau2(rho: float) -> float:
    return min(0.1, 0.4 * (1.0 - rho))


class SolverConfig(BaseModel):
    """All constants of the a posteriori solvers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(gt=0, description="Lower spectral bound")
    Gamma: float = Field(gt=0, description="Upper spectral bound")
    nu: float = Field(default=0.9, gt=0, lt=1)
    theta: float = Field(default=0.75, gt=0, lt=1, description="Threshold decrease factor")
    omega: float = Field(default=0.5, gt=0, lt=1, description="Residual tolerance decrease factor")
    tau1: float = Field(default=0.1, gt=0, lt=1)
    tau2: float | None = Field(default=None, gt=0, description="Defaults to min(0.1, 0.4(1 - rho))")
    alpha0: float = Field(gt=0, description="Initial threshold")
    epsilon: float = Field(gt=0, description="Target error ||u - u*||")
    max_iter: int = Field(default=10000, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _fill_tau2(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("tau2") is None:
            gamma, Gamma = data.get("gamma"), data.get("Gamma")
            if gamma and Gamma and float(gamma) > 0 and float(Gamma) > 0:
                rho = (float(Gamma) - float(gamma)) / (float(Gamma) + float(gamma))
                data = {**data, "tau2": default_tau2(abs(rho))}
        return data

    @model_validator(mode="after")
    def _check_bounds(self) -> "SolverConfig":
        if self.Gamma < self.gamma:
            raise ValueError(f"Gamma ({self.Gamma}) must be at least gamma ({self.gamma})")
        return self

    @property
    def bounds(self) -> SpectrumBounds:
        return SpectrumBounds(self.gamma, self.Gamma)

    @property
    def kappa(self) -> float:
        return self.Gamma / self.gamma

    @property
    def mu(self) -> float:
        return 2.0 / (self.gamma + self.Gamma)

    @property
    def rho(self) -> float:
        return (self.Gamma - self.gamma) / (self.Gamma + self.gamma)

    def check_alpha0(self, f_norm: float, edge_count: int) -> None:
        """Enforce alpha0 >= mu ||f|| / E."""
        required = self.mu * f_norm / edge_count
        if self.alpha0 < required:
            logger.error(f"alpha0={self.alpha0:.6g} below mu*||f||/E={required:.6g}")
            raise InvalidConfigError(
                "alpha0_factor", f"alpha0={self.alpha0:.6g} must be >= mu*||f||/E={required:.6g}"
            )

    @classmethod
    def build(
        cls,
        bounds: SpectrumBounds,
        f_norm: float,
        edge_count: int,
        epsilon: float,
        alpha0_factor: float = 0.5,
        **overrides: Any,
    ) -> "SolverConfig":
        """
        Fill the defaults and validate every requirement.

        Args:
            bounds: Spectrum bounds of A
            f_norm: ||f||
            edge_count: Number of tree edges E
            epsilon: Target error
            alpha0_factor: alpha0 = alpha0_factor * mu * ||f||
            **overrides: nu, theta, omega, tau1, tau2, max_iter

        Returns:
            Validated SolverConfig
        """
        mu = 2.0 / (bounds.gamma + bounds.Gamma)
        alpha0 = alpha0_factor * mu * f_norm if f_norm > 0 else 1.0
        values = {k: v for k, v in overrides.items() if v is not None}
        config = parse_model(
            cls,
            dict(gamma=bounds.gamma, Gamma=bounds.Gamma, alpha0=alpha0, epsilon=epsilon, **values),
        )
        config.check_alpha0(f_norm, edge_count)
        return config


class Schedule(BaseModel):
    """Threshold sequence alpha_k of the a priori iteration."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["a-posteriori", "algebraic", "exponential"] = "a-posteriori"
    p: float | None = Field(default=None, gt=0, lt=2)
    c0: float = Field(default=1.0, gt=0)
    rho_tilde: float | None = Field(default=None, gt=0, lt=1)

    @model_validator(mode="after")
    def _check_kind(self) -> "Schedule":
        if self.kind == "algebraic" and self.p is None:
            raise ValueError("algebraic schedule needs p")
        if self.kind != "a-posteriori" and self.rho_tilde is None:
            raise ValueError(f"{self.kind} schedule needs rho_tilde")
        return self

    def alpha(self, k: int) -> float:
        """alpha_k for step k -> k+1."""
        if self.kind == "algebraic":
            return (self.rho_tilde ** (k + 1) * self.c0) ** (2.0 / (2.0 - self.p))
        if self.kind == "exponential":
            return self.rho_tilde ** (k + 1) * self.c0
        raise ScheduleKindError("a-posteriori schedule has no closed-form alpha_k")

    def check_rate(self, rho: float) -> None:
        if not rho < self.rho_tilde < 1:
            logger.error(f"rho_tilde={self.rho_tilde} outside ({rho:.4f}, 1)")
            raise InvalidConfigError("rho_tilde", f"must lie in ({rho:.6g}, 1), got {self.rho_tilde}")


def parse_model(model: type[BaseModel], values: dict) -> BaseModel:
    """Validate into `model`, reporting the first offending key."""
    try:
        return model.model_validate(values)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or model.__name__
        logger.error(f"Invalid {model.__name__}: {key}: {first['msg']}")
        raise InvalidConfigError(key, first["msg"]) from e
