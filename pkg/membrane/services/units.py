"""Conversion of nondimensional model parameters to physical units."""
from typing import List, Optional

from membrane.domain.base import FrozenSchema
from membrane.domain.params import ModelParams

# eps * E_c in joules
INTERFACE_ENERGY = 5e-19
# characteristic length x_c in metres
LENGTH_SCALE = 1e-6


class PhysicalUnits(FrozenSchema):
    """Physical values: energies in J, tensions in J/m^2, couplings in J/m."""

    energy_scale: float
    length_scale: float
    kappa_phys: float
    sigma_phys: Optional[float] = None
    lambda_phys: Optional[float] = None
    G_phys: List[float]
    L_phys: List[float]

    def rows(self) -> List[tuple]:
        """(quantity, value, unit) rows for display."""
        rows = [
            ("E_c", self.energy_scale, "J"),
            ("x_c", self.length_scale, "m"),
            ("kappa", self.kappa_phys, "J"),
        ]
        if self.sigma_phys is not None:
            rows.append(("sigma", self.sigma_phys, "J/m^2"))
            rows.append(("Lambda", self.lambda_phys, "J/m"))
        else:
            rows.append(("G", self.G_phys, "J/m^2"))
            rows.append(("L", self.L_phys, "J/m"))
        return rows


def physical_units(params: ModelParams) -> PhysicalUnits:
    energy = INTERFACE_ENERGY / params.eps
    surface = energy / LENGTH_SCALE ** 2
    line = energy / LENGTH_SCALE
    return PhysicalUnits(
        energy_scale=energy,
        length_scale=LENGTH_SCALE,
        kappa_phys=params.kappa * energy,
        sigma_phys=params.sigma * surface if params.is_isotropic else None,
        lambda_phys=params.Lambda * line if params.is_isotropic else None,
        G_phys=[float(x) * surface for x in params.G.ravel()],
        L_phys=[float(x) * line for x in params.L.ravel()],
    )
