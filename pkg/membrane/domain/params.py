from typing import Optional, Tuple

import numpy as np
from pydantic import Field, field_validator

from membrane.domain.base import FrozenSchema

SYMMETRY_TOL = 1e-14


def check_symmetric(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (2, 2):
        raise ValueError(f"{name} must be a 2x2 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(float(np.abs(a).max()), 1.0)
    if abs(a[0, 1] - a[1, 0]) > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return a


def check_spd(a, name: str) -> np.ndarray:
    a = check_symmetric(a, name)
    if np.linalg.eigvalsh(a).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return a


def check_psd(a, name: str) -> np.ndarray:
    a = check_symmetric(a, name)
    if np.linalg.eigvalsh(a).min() < -SYMMETRY_TOL * max(float(np.abs(a).max()), 1.0):
        raise ValueError(f"{name} must be positive semidefinite")
    return a


class ModelParams(FrozenSchema):
    """Model coefficients and time step.

    G must be symmetric positive definite. L must be symmetric positive
    semidefinite; L = 0 switches the coupling off.
    """

    eps: float = Field(gt=0)
    kappa: float = Field(gt=0)
    tau: float = Field(gt=0)
    G: np.ndarray
    L: np.ndarray

    @field_validator("G", mode="before")
    @classmethod
    def _g_spd(cls, v):
        return check_spd(v, "G")

    @field_validator("L", mode="before")
    @classmethod
    def _l_psd(cls, v):
        return check_psd(v, "L")

    @classmethod
    def isotropic(
        cls, eps: float, kappa: float, sigma: float, Lambda: float, tau: float
    ) -> "ModelParams":
        """G = sigma*I and L = Lambda*I."""
        return cls(
            eps=eps,
            kappa=kappa,
            tau=tau,
            G=sigma * np.eye(2),
            L=Lambda * np.eye(2),
        )

    @property
    def is_isotropic(self) -> bool:
        return bool(
            self.G[0, 1] == 0 and self.G[0, 0] == self.G[1, 1]
            and self.L[0, 1] == 0 and self.L[0, 0] == self.L[1, 1]
        )

    @property
    def sigma(self) -> Optional[float]:
        return float(self.G[0, 0]) if self.is_isotropic else None

    @property
    def Lambda(self) -> Optional[float]:
        return float(self.L[0, 0]) if self.is_isotropic else None

    def coefficient_bounds(self) -> Tuple[float, float, float, float]:
        """(G_lower, G_upper, L_lower, L_upper) eigen-extremes."""
        g = np.linalg.eigvalsh(self.G)
        l_eig = np.linalg.eigvalsh(self.L)
        return float(g[0]), float(g[-1]), float(l_eig[0]), float(l_eig[-1])

    def with_tau(self, tau: float) -> "ModelParams":
        return self.model_copy(update={"tau": tau})
