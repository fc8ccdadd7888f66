"""Physical constants and defect geometry shared across the package."""

import math
from dataclasses import dataclass, fields

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """Fundamental constants plus the NV and P1 spin-Hamiltonian parameters.

    Frequencies are angular (rad/s) throughout; magnetic fields are in tesla.
    Plain-frequency (Hz) values appear only at file and CLI boundaries.
    """

    gamma_e: float = TWO_PI * 28.03e9  # electron gyromagnetic ratio, rad s^-1 T^-1
    d_zfs: float = TWO_PI * 2.87e9     # NV ground-state zero-field splitting, rad/s
    e_strain: float = TWO_PI * 10e6    # NV transverse strain splitting, rad/s
    a_par: float = TWO_PI * 114.03e6   # P1 hyperfine coupling along the defect axis, rad/s
    a_perp: float = TWO_PI * 81.33e6   # P1 hyperfine coupling transverse to the axis, rad/s
    hbar: float = 1.054571817e-34      # J s
    k_b: float = 1.380649e-23          # J / K
    mu_0: float = 1.25663706212e-6     # T m / A
    h: float = 6.62607015e-34          # J s
    c: float = 299792458.0             # m / s

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"constant {f.name!r} must be finite and positive, got {value!r}")


DEFAULT_CONSTANTS = PhysicalConstants()

# The four <111> defect orientation classes of the diamond lattice.
NV_AXES = np.array(
    [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]
) / math.sqrt(3.0)

NV_AXIS_LABELS = ("[111]", "[1-1-1]", "[-11-1]", "[-1-11]")
