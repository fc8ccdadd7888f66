"""Transition frequencies of NV and P1 defect spins in an applied magnetic field.

The fast paths are closed-form expressions: second-order perturbation theory
for the NV ground-state triplet and first-order hyperfine splittings for the
P1 center.  Exact diagonalization of the corresponding spin Hamiltonians is
provided alongside as a cross-check oracle; the closed forms are what the
sweep and fit code call in the inner loop.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import DEFAULT_CONSTANTS, NV_AXES, NV_AXIS_LABELS, PhysicalConstants

# Spin-1 operators, basis ordered m = +1, 0, -1.
SPIN1_Z = np.diag([1.0, 0.0, -1.0])
SPIN1_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / math.sqrt(2.0)
SPIN1_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / math.sqrt(2.0)

# Spin-1/2 operators, basis ordered m = +1/2, -1/2.
SPIN_HALF_Z = np.diag([0.5, -0.5])
SPIN_HALF_X = np.array([[0.0, 0.5], [0.5, 0.0]])
SPIN_HALF_Y = np.array([[0.0, -0.5j], [0.5j, 0.0]])


def _as_field_vector(b_field):
    b = np.asarray(b_field, dtype=float)
    if b.shape != (3,):
        raise ValueError(f"magnetic field must be a 3-vector, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("magnetic field components must be finite")
    return b


def _rotation_x(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rotation_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rotation_z(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_to_unit_vector(theta_x, theta_y, theta_z):
    """Unit vector obtained by rotating z_hat actively about x, then y, then z.

    Rotations are right handed; the composite matrix is Rz(theta_z) @
    Ry(theta_y) @ Rx(theta_x).  This is the convention used for the field
    orientation everywhere in the package.
    """
    for name, angle in (("theta_x", theta_x), ("theta_y", theta_y), ("theta_z", theta_z)):
        if not math.isfinite(angle):
            raise ValueError(f"{name} must be finite, got {angle!r}")
    matrix = _rotation_z(theta_z) @ _rotation_y(theta_y) @ _rotation_x(theta_x)
    return matrix @ np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class FieldOrientation:
    """Applied-field direction given as three rotation angles plus a magnitude."""

    theta_x: float  # rad
    theta_y: float  # rad
    theta_z: float  # rad
    magnitude: float  # tesla

    def __post_init__(self):
        if not (math.isfinite(self.magnitude) and self.magnitude >= 0.0):
            raise ValueError(f"field magnitude must be finite and >= 0, got {self.magnitude!r}")

    def unit_vector(self):
        return rotate_to_unit_vector(self.theta_x, self.theta_y, self.theta_z)

    def field_vector(self):
        return self.magnitude * self.unit_vector()


@dataclass(frozen=True)
class NvTransitionTable:
    """Both triplet transition frequencies for each of the four NV classes.

    ``omega_minus``/``omega_plus`` are angular frequencies (rad/s), one entry
    per orientation class in the order of ``axes``.
    """

    axes: np.ndarray          # (4, 3) unit vectors
    labels: tuple             # (4,) class labels
    omega_minus: np.ndarray   # (4,) rad/s
    omega_plus: np.ndarray    # (4,) rad/s

    def __post_init__(self):
        if np.any(self.omega_minus < 0.0) or np.any(self.omega_plus < 0.0):
            raise ValueError("transition frequencies must be non-negative")
        if np.any(self.omega_plus < self.omega_minus):
            raise ValueError("omega_plus must not be below omega_minus")


def nv_transition_frequencies(b_field, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Second-order NV transition frequencies for all four orientation classes.

    Parameters
    ----------
    b_field : array_like, shape (3,)
        Applied field in tesla, crystal frame (cubic axes).
    constants : PhysicalConstants

    Returns
    -------
    NvTransitionTable

    Notes
    -----
    For each class the field is split into the component along the defect
    axis and the transverse remainder, and

        omega_pm = d_zfs +- sqrt((gamma_e*B_par)**2 + e_strain**2)
                   + 1.5 * (gamma_e*B_perp)**2 / d_zfs.

    The transverse term is the leading repulsion from the m=0 level; the
    expression is exact for a purely axial field.  The nitrogen-14 hyperfine
    structure is intentionally not modeled.
    """
    b = _as_field_vector(b_field)
    b_par = NV_AXES @ b
    b_perp_sq = np.maximum(float(b @ b) - b_par**2, 0.0)
    splitting = np.sqrt((constants.gamma_e * b_par) ** 2 + constants.e_strain**2)
    transverse = 1.5 * constants.gamma_e**2 * b_perp_sq / constants.d_zfs
    return NvTransitionTable(
        axes=NV_AXES.copy(),
        labels=NV_AXIS_LABELS,
        omega_minus=constants.d_zfs - splitting + transverse,
        omega_plus=constants.d_zfs + splitting + transverse,
    )


def defect_frame_components(b_field, axis):
    """Resolve a crystal-frame field into (transverse, 0, axial) defect-frame parts.

    The defect z axis is ``axis``; the transverse direction is chosen along
    the transverse part of the field itself, which is the natural choice for
    Hamiltonians that are isotropic in the transverse plane.
    """
    b = _as_field_vector(b_field)
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0.0:
        raise ValueError("defect axis must be non-zero")
    axis = axis / norm
    b_par = float(b @ axis)
    transverse = b - b_par * axis
    return np.array([np.linalg.norm(transverse), 0.0, b_par])


def nv_exact_levels(b_defect_frame, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Eigenfrequencies (rad/s, ascending) of the full NV triplet Hamiltonian.

    ``b_defect_frame`` is the field in tesla expressed in the defect frame
    (z along the NV axis).  The Hamiltonian is

        H = d_zfs*Sz^2 + e_strain*(Sx^2 - Sy^2) + gamma_e*(B . S).
    """
    b = _as_field_vector(b_defect_frame)
    h = (
        constants.d_zfs * SPIN1_Z @ SPIN1_Z
        + constants.e_strain * (SPIN1_X @ SPIN1_X - SPIN1_Y @ SPIN1_Y)
        + constants.gamma_e * (b[0] * SPIN1_X + b[1] * SPIN1_Y + b[2] * SPIN1_Z)
    )
    return np.linalg.eigvalsh(h)


def nv_exact_transitions(b_defect_frame, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Two NV transition frequencies (rad/s) from exact diagonalization.

    Levels are labeled by maximal overlap with the unperturbed basis states
    (ties broken toward the lower eigenvalue index); the transitions are the
    eigenvalue differences from the m=0-character state, returned ascending.
    """
    b = _as_field_vector(b_defect_frame)
    h = (
        constants.d_zfs * SPIN1_Z @ SPIN1_Z
        + constants.e_strain * (SPIN1_X @ SPIN1_X - SPIN1_Y @ SPIN1_Y)
        + constants.gamma_e * (b[0] * SPIN1_X + b[1] * SPIN1_Y + b[2] * SPIN1_Z)
    )
    levels, vectors = np.linalg.eigh(h)
    # Basis row 1 is |m=0>; np.argmax returns the first maximizer on ties.
    weight_m0 = np.abs(vectors[1, :]) ** 2
    idx0 = int(np.argmax(weight_m0))
    others = [k for k in range(3) if k != idx0]
    transitions = np.sort(levels[others] - levels[idx0])
    return transitions


def p1_transition_frequencies(b_field, axis, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """First-order P1 resonance frequencies (rad/s) for one Jahn-Teller axis.

    Returns the three lines ``gamma_e*|B| - omega_en``, ``gamma_e*|B|`` and
    ``gamma_e*|B| + omega_en`` (ascending), where the effective hyperfine
    splitting is

        omega_en = sqrt(a_par^2 cos^2(theta) + a_perp^2 sin^2(theta))

    and theta is the angle between the field and the defect axis.  Valid in
    the high-field regime gamma_e*|B| >> a_par; at low fields the lowest line
    of the raw expression goes negative and the expansion has lost meaning.
    """
    b = _as_field_vector(b_field)
    magnitude = float(np.linalg.norm(b))
    if magnitude == 0.0:
        raise ValueError("field magnitude must be non-zero for the P1 line positions")
    axis = np.asarray(axis, dtype=float)
    axis_norm = np.linalg.norm(axis)
    if axis_norm == 0.0:
        raise ValueError("defect axis must be non-zero")
    cos_theta = float(b @ axis) / (magnitude * axis_norm)
    cos_sq = min(cos_theta * cos_theta, 1.0)
    omega_en = math.sqrt(constants.a_par**2 * cos_sq + constants.a_perp**2 * (1.0 - cos_sq))
    center = constants.gamma_e * magnitude
    return np.array([center - omega_en, center, center + omega_en])


def _p1_hamiltonian(b_field, axis, constants):
    components = defect_frame_components(b_field, axis)
    id_nuclear = np.eye(3)
    sx = np.kron(SPIN_HALF_X, id_nuclear)
    sy = np.kron(SPIN_HALF_Y, id_nuclear)
    sz = np.kron(SPIN_HALF_Z, id_nuclear)
    sxix = np.kron(SPIN_HALF_X, SPIN1_X)
    syiy = np.kron(SPIN_HALF_Y, SPIN1_Y)
    sziz = np.kron(SPIN_HALF_Z, SPIN1_Z)
    return (
        constants.gamma_e * (components[0] * sx + components[1] * sy + components[2] * sz)
        + constants.a_perp * (sxix + syiy)
        + constants.a_par * sziz
    )


def p1_exact_levels(b_field, axis, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Eigenfrequencies (rad/s, ascending) of the 6x6 P1 spin Hamiltonian.

    Electron spin 1/2 coupled to the nitrogen-14 nuclear spin 1 through an
    axially symmetric hyperfine tensor, plus the electron Zeeman term; the
    nuclear Zeeman term is negligible at the fields of interest and omitted.
    """
    return np.linalg.eigvalsh(_p1_hamiltonian(b_field, axis, constants))


def p1_exact_transitions(b_field, axis, constants: PhysicalConstants = DEFAULT_CONSTANTS):
    """Nuclear-spin-conserving P1 transition frequencies from the 6x6 Hamiltonian.

    Eigenstates are labeled by their dominant product-basis component
    |m_S, m_I>; for each nuclear projection the returned line is the spacing
    between the m_S = +-1/2 partners.  Sorted ascending, so directly
    comparable with :func:`p1_transition_frequencies`.  Requires a field high
    enough that the labeling is unambiguous (a bijection); raises otherwise.
    """
    levels, vectors = np.linalg.eigh(_p1_hamiltonian(b_field, axis, constants))
    weights = np.abs(vectors) ** 2
    dominant = np.argmax(weights, axis=0)
    if len(set(int(d) for d in dominant)) != 6:
        raise ValueError(
            "eigenstate character labeling is not a bijection; "
            "field too low for nuclear-spin-conserving line extraction"
        )
    level_of_basis = {int(basis): levels[state] for state, basis in enumerate(dominant)}
    # Basis index = s_idx*3 + i_idx with s_idx 0 for m_S=+1/2 and i_idx 0,1,2
    # for m_I = +1, 0, -1.
    lines = [abs(level_of_basis[i_idx] - level_of_basis[3 + i_idx]) for i_idx in range(3)]
    return np.array(sorted(lines))
