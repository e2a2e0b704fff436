from typing import Literal, Union

from pydantic import Field, model_validator
from typing_extensions import Annotated

from membrane.domain.base import FrozenSchema


class PolynomialPotential(FrozenSchema):
    """W(s) = a4 s^4 - a2 s^2 - mu0 s + a0, split as W1 = a4 s^4."""

    variant: Literal["polynomial"] = "polynomial"
    a4: float = Field(default=1.0, gt=0)
    a2: float = Field(default=2.0, gt=0)
    a0: float = 0.0
    mu0: float = 0.0


class LogExtendedPotential(FrozenSchema):
    """Flory-Huggins potential, its convex part extended quadratically beyond 1 - delta."""

    variant: Literal["log_extended"] = "log_extended"
    theta: float = Field(default=4.0, gt=0)
    theta_c: float = Field(default=5.0, gt=0)
    mu0: float = 0.0
    delta: float = Field(default=0.02, gt=0, lt=1)

    @model_validator(mode="after")
    def _temperatures_ordered(self):
        if not self.theta < self.theta_c:
            raise ValueError("log potential needs 0 < theta < theta_c")
        return self


class MoreauYosidaPotential(FrozenSchema):
    """Logarithmic potential whose convex part is replaced by its Moreau-Yosida envelope."""

    variant: Literal["moreau_yosida"] = "moreau_yosida"
    lam: float = Field(default=0.01, gt=0)
    base: LogExtendedPotential = LogExtendedPotential()


PotentialSpec = Annotated[
    Union[PolynomialPotential, LogExtendedPotential, MoreauYosidaPotential],
    Field(discriminator="variant"),
]

# Potential used by all shipped pattern studies (minima near +-0.71)
DEFAULT_POTENTIAL = LogExtendedPotential(theta=4.0, theta_c=5.0, mu0=0.0, delta=0.02)
