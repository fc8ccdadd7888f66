"""Transition-frequency checks against closed forms and dense diagonalization.

Frozen numbers below were computed with standalone scripts (plain formula
evaluation and independent 3x3 / 6x6 eigensolves), not with this package.
"""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cdmr.constants import DEFAULT_CONSTANTS, NV_AXES, TWO_PI
from cdmr.spins import (
    FieldOrientation,
    NvTransitionTable,
    defect_frame_components,
    nv_exact_levels,
    nv_exact_transitions,
    nv_transition_frequencies,
    p1_exact_levels,
    p1_exact_transitions,
    p1_transition_frequencies,
    rotate_to_unit_vector,
)

C = DEFAULT_CONSTANTS

# Independently computed expected values, Hz.
NV_AXIAL_3MT = (2785317486.4567657, 2954682513.543234)
NV_MIXED_FORMULA = (2813465717.3720746, 2927355551.861374)   # B_par=2 mT, B_perp=1 mT
NV_MIXED_EXACT = (2813442921.8145475, 2927375730.545416)
NV_ZERO_FIELD = (2859999999.9999995, 2880000000.0)
P1_89MT_AXIAL = (2380640000.0, 2494670000.0, 2608700000.0)
P1_89MT_AXIAL_EXACT = (2381995994.072203, 2497321454.2222605, 2609995460.1500573)
P1_MAGIC_SPLITTING_HZ = 93509319.85636511  # cos^2(theta) = 1/3

angle = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@given(angle, angle, angle)
def test_rotation_gives_unit_vector(tx, ty, tz):
    v = rotate_to_unit_vector(tx, ty, tz)
    assert v.shape == (3,)
    assert math.isclose(float(v @ v), 1.0, rel_tol=1e-12)


@given(angle)
def test_z_rotation_fixes_z_axis(tz):
    assert np.allclose(rotate_to_unit_vector(0.0, 0.0, tz), [0.0, 0.0, 1.0], atol=1e-15)


def test_rotation_quarter_turns():
    # Active right-handed: x rotation takes z into -y, y rotation takes z into +x.
    assert np.allclose(rotate_to_unit_vector(math.pi / 2, 0, 0), [0, -1, 0], atol=1e-15)
    assert np.allclose(rotate_to_unit_vector(0, math.pi / 2, 0), [1, 0, 0], atol=1e-15)


def test_rotation_rejects_non_finite():
    with pytest.raises(ValueError, match="theta_y"):
        rotate_to_unit_vector(0.0, math.nan, 0.0)


def test_field_orientation_vector_and_validation():
    orientation = FieldOrientation(0.1, -0.2, 0.3, 2.5e-3)
    assert np.allclose(orientation.field_vector(), 2.5e-3 * orientation.unit_vector())
    with pytest.raises(ValueError, match="magnitude"):
        FieldOrientation(0.0, 0.0, 0.0, -1e-3)


def test_nv_axial_field_frozen_values():
    table = nv_transition_frequencies(3e-3 * NV_AXES[0])
    assert table.omega_minus[0] / TWO_PI == pytest.approx(NV_AXIAL_3MT[0], rel=1e-12)
    assert table.omega_plus[0] / TWO_PI == pytest.approx(NV_AXIAL_3MT[1], rel=1e-12)
    # For a purely axial field the second-order expression is exact.
    frame = defect_frame_components(3e-3 * NV_AXES[0], NV_AXES[0])
    exact = nv_exact_transitions(frame)
    assert exact[0] == pytest.approx(table.omega_minus[0], rel=1e-12)
    assert exact[1] == pytest.approx(table.omega_plus[0], rel=1e-12)


def test_nv_mixed_field_frozen_values():
    transverse = np.array([1.0, -1.0, 0.0]) / math.sqrt(2.0)  # orthogonal to the [111] axis
    b = 2e-3 * NV_AXES[0] + 1e-3 * transverse
    table = nv_transition_frequencies(b)
    assert table.omega_minus[0] / TWO_PI == pytest.approx(NV_MIXED_FORMULA[0], rel=1e-12)
    assert table.omega_plus[0] / TWO_PI == pytest.approx(NV_MIXED_FORMULA[1], rel=1e-12)
    exact = nv_exact_transitions(defect_frame_components(b, NV_AXES[0]))
    assert exact[0] / TWO_PI == pytest.approx(NV_MIXED_EXACT[0], rel=1e-9)
    assert exact[1] / TWO_PI == pytest.approx(NV_MIXED_EXACT[1], rel=1e-9)
    # Second-order formula drifts from the exact levels by tens of kHz here.
    assert abs(table.omega_minus[0] - exact[0]) / TWO_PI < 5e4
    assert abs(table.omega_plus[0] - exact[1]) / TWO_PI < 5e4


def test_nv_zero_field_strain_doublet():
    table = nv_transition_frequencies([0.0, 0.0, 0.0])
    for i in range(4):
        assert table.omega_minus[i] / TWO_PI == pytest.approx(NV_ZERO_FIELD[0], rel=1e-15)
        assert table.omega_plus[i] / TWO_PI == pytest.approx(NV_ZERO_FIELD[1], rel=1e-15)


def test_nv_field_sign_symmetry():
    b = np.array([1.3e-3, -0.4e-3, 2.1e-3])
    table_pos = nv_transition_frequencies(b)
    table_neg = nv_transition_frequencies(-b)
    assert np.array_equal(table_pos.omega_minus, table_neg.omega_minus)
    assert np.array_equal(table_pos.omega_plus, table_neg.omega_plus)


@given(st.lists(st.floats(-0.05, 0.05), min_size=3, max_size=3))
def test_nv_branches_ordered_and_positive(components):
    table = nv_transition_frequencies(components)
    assert np.all(table.omega_plus >= table.omega_minus)
    assert np.all(table.omega_minus > 0.0)


def test_nv_rejects_bad_field():
    with pytest.raises(ValueError, match="3-vector"):
        nv_transition_frequencies([1e-3, 2e-3])
    with pytest.raises(ValueError, match="finite"):
        nv_transition_frequencies([0.0, math.inf, 0.0])


def test_nv_table_validation():
    good = nv_transition_frequencies([0.0, 0.0, 1e-3])
    with pytest.raises(ValueError, match="omega_plus"):
        NvTransitionTable(
            axes=good.axes,
            labels=good.labels,
            omega_minus=good.omega_plus,
            omega_plus=good.omega_minus,
        )


@given(st.lists(st.floats(-0.01, 0.01), min_size=3, max_size=3))
def test_nv_exact_levels_trace_invariant(b):
    # Zeeman and strain terms are traceless, so the level sum is 2*d_zfs.
    levels = nv_exact_levels(b)
    assert float(np.sum(levels)) == pytest.approx(2.0 * C.d_zfs, rel=1e-12)


def test_defect_frame_components_geometry():
    b = np.array([2e-3, -1e-3, 0.5e-3])
    axis = np.array([1.0, 1.0, 1.0])  # normalized internally
    frame = defect_frame_components(b, axis)
    assert frame[1] == 0.0
    assert frame[0] >= 0.0
    assert float(np.linalg.norm(frame)) == pytest.approx(float(np.linalg.norm(b)), rel=1e-12)
    assert frame[2] == pytest.approx(float(b @ axis) / math.sqrt(3.0), rel=1e-12)
    with pytest.raises(ValueError, match="axis"):
        defect_frame_components(b, [0.0, 0.0, 0.0])


def test_p1_axis_aligned_frozen_lines():
    b = 89e-3 * NV_AXES[0]
    lines = p1_transition_frequencies(b, NV_AXES[0])
    for got, expected in zip(lines, P1_89MT_AXIAL):
        assert got / TWO_PI == pytest.approx(expected, rel=1e-12)


def test_p1_magic_angle_splitting():
    # A field along z makes cos^2(theta) = 1/3 against all four <111> axes.
    b = np.array([0.0, 0.0, 89e-3])
    for axis in NV_AXES:
        lines = p1_transition_frequencies(b, axis)
        half_split = 0.5 * (lines[2] - lines[0]) / TWO_PI
        assert half_split == pytest.approx(P1_MAGIC_SPLITTING_HZ, rel=1e-12)


@given(
    st.lists(st.floats(-0.1, 0.1), min_size=3, max_size=3).filter(
        lambda b: sum(v * v for v in b) > 1e-8
    ),
    st.sampled_from([0, 1, 2, 3]),
)
def test_p1_lines_centered_on_zeeman_frequency(b, axis_index):
    lines = p1_transition_frequencies(b, NV_AXES[axis_index])
    b_mag = math.sqrt(sum(v * v for v in b))
    assert lines[1] == pytest.approx(C.gamma_e * b_mag, rel=1e-15)
    assert lines[0] <= lines[1] <= lines[2]
    # Hyperfine lines sit symmetrically around the center.
    assert lines[1] - lines[0] == pytest.approx(lines[2] - lines[1], rel=1e-12)


def test_p1_rejects_degenerate_inputs():
    with pytest.raises(ValueError, match="magnitude"):
        p1_transition_frequencies([0.0, 0.0, 0.0], NV_AXES[0])
    with pytest.raises(ValueError, match="axis"):
        p1_transition_frequencies([0.0, 0.0, 1e-2], [0.0, 0.0, 0.0])


def test_p1_exact_levels_traceless_and_sorted():
    levels = p1_exact_levels(89e-3 * NV_AXES[1], NV_AXES[1])
    assert levels.shape == (6,)
    assert np.all(np.diff(levels) >= 0.0)
    assert float(np.sum(levels)) == pytest.approx(0.0, abs=1e-6 * float(np.max(np.abs(levels))))


def test_p1_exact_transitions_frozen_at_high_field():
    exact = p1_exact_transitions(89e-3 * NV_AXES[0], NV_AXES[0])
    for got, expected in zip(exact, P1_89MT_AXIAL_EXACT):
        assert got / TWO_PI == pytest.approx(expected, rel=1e-9)


def test_p1_first_order_tracks_exact_lines():
    # First-order lines stay within a few MHz of the 6x6 eigensolve at 89 mT.
    for direction in (NV_AXES[0], np.array([0.0, 0.0, 1.0])):
        b = 89e-3 * direction / np.linalg.norm(direction)
        approx = p1_transition_frequencies(b, NV_AXES[0])
        exact = p1_exact_transitions(b, NV_AXES[0])
        assert np.max(np.abs(approx - exact)) < TWO_PI * 4e6
