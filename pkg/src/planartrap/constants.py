"""Physical constants and unit conversions.

Config files use lab units (V, MHz, torr, u, mm, Angstrom^3); everything
internal is strict SI. Energies are reported in eV.
"""

import math

# CODATA 2018
ELEMENTARY_CHARGE = 1.602176634e-19  # C, exact
ATOMIC_MASS = 1.66053906660e-27      # kg
BOLTZMANN = 1.380649e-23             # J/K, exact
EPSILON_0 = 8.8541878128e-12         # F/m

TORR = 133.322368421053              # Pa, 101325/760 exact ratio
MM = 1e-3
UM = 1e-6
ANGSTROM3 = 1e-30                    # m^3

SR88_MASS_U = 87.9056                # 88Sr, for the default ion
HE_MASS_U = 4.002602
HE_POLARIZABILITY_A3 = 0.205         # volume polarizability of helium


def u_to_kg(mass_u: float) -> float:
    return mass_u * ATOMIC_MASS


def torr_to_pa(p_torr: float) -> float:
    return p_torr * TORR


def mhz_to_rad_s(f_mhz: float) -> float:
    return 2.0 * math.pi * f_mhz * 1e6


def joule_to_ev(e_j: float) -> float:
    return e_j / ELEMENTARY_CHARGE


def ev_to_joule(e_ev: float) -> float:
    return e_ev * ELEMENTARY_CHARGE


def fwhm_to_sigma(fwhm: float) -> float:
    """Gaussian full width at half maximum -> standard deviation."""
    return fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
