"""Round trips for the orientation, lineshape and linewidth fits plus CSV IO.

Synthetic data are generated with the forward models on known parameters, so
every fit has an exact answer to come back to.
"""

import math

import numpy as np
import pytest

from cdmr.constants import TWO_PI
from cdmr.fitting import (
    OdmrDataset,
    cavity_reflectivity_model,
    fit_cavity_lineshape,
    fit_lorentzian_fwhm,
    fit_orientation,
    load_odmr_csv,
    load_trace_csv,
    lorentzian_dip_model,
)
from cdmr.spins import nv_transition_frequencies, rotate_to_unit_vector

# A strong tilt: the four defect axes see clearly different projections, so
# the eight branches stay separated and the pairing is unambiguous.
TRUTH = (-0.2 * math.pi, 0.002 * math.pi, 0.05 * math.pi)


def synthetic_dataset(angles=TRUTH, b_mags=(2e-3, 3.5e-3, 5e-3, 6.5e-3, 8e-3),
                      lines_per_record=8, rng=None, noise=0.0):
    b_hat = rotate_to_unit_vector(*angles)
    records = []
    for b_mag in b_mags:
        table = nv_transition_frequencies(b_mag * b_hat)
        lines = np.concatenate([table.omega_minus, table.omega_plus])
        lines = np.sort(lines)[:lines_per_record]
        if noise:
            lines = lines + rng.normal(0.0, noise, size=lines.size)
        records.append((b_mag, tuple(lines)))
    return OdmrDataset(records=tuple(records))


def test_orientation_round_trip_from_perturbed_start():
    dataset = synthetic_dataset()
    initial = (TRUTH[0] + 0.01, TRUTH[1] - 0.02, TRUTH[2])
    result = fit_orientation(dataset, initial)
    assert result.converged
    assert result.parameters["theta_x"] == pytest.approx(TRUTH[0], abs=1e-6)
    assert result.parameters["theta_y"] == pytest.approx(TRUTH[1], abs=1e-6)
    assert result.parameters["theta_z"] == TRUTH[2]
    assert result.residual_norm < 1e-9
    assert result.parameter_order == ("theta_x", "theta_y", "theta_z")


def test_orientation_theta_z_is_held_fixed():
    """theta_z is a gauge direction: a different initial value still recovers
    the same field direction through compensating theta_x, theta_y."""
    dataset = synthetic_dataset()
    other_z = TRUTH[2] + 0.3
    result = fit_orientation(dataset, (TRUTH[0], TRUTH[1], other_z))
    assert result.parameters["theta_z"] == other_z
    fitted_hat = rotate_to_unit_vector(
        result.parameters["theta_x"], result.parameters["theta_y"], other_z
    )
    truth_hat = rotate_to_unit_vector(*TRUTH)
    assert abs(float(np.dot(fitted_hat, truth_hat))) > 1.0 - 1e-9
    # Covariance stays 3x3 with an identically zero held-parameter block.
    assert result.covariance.shape == (3, 3)
    assert np.all(result.covariance[2, :] == 0.0)
    assert np.all(result.covariance[:, 2] == 0.0)


def test_orientation_fit_is_deterministic_and_order_invariant():
    records = list(synthetic_dataset().records)
    shuffled = OdmrDataset(records=(records[3], records[0], records[4], records[1], records[2]))
    assert shuffled.records == tuple(records)
    initial = (TRUTH[0] + 0.005, TRUTH[1] - 0.005, TRUTH[2])
    first = fit_orientation(shuffled, initial)
    second = fit_orientation(synthetic_dataset(), initial)
    assert first.parameters == second.parameters
    assert first.residual_norm == second.residual_norm


def test_orientation_handles_ragged_records():
    full = synthetic_dataset()
    trimmed = []
    for i, (b_mag, lines) in enumerate(full.records):
        keep = lines if i % 2 == 0 else (lines[0], lines[-1])
        trimmed.append((b_mag, keep))
    result = fit_orientation(OdmrDataset(records=tuple(trimmed)),
                             (TRUTH[0] + 0.004, TRUTH[1] - 0.004, TRUTH[2]))
    assert result.converged
    assert result.parameters["theta_x"] == pytest.approx(TRUTH[0], abs=1e-6)
    assert result.parameters["theta_y"] == pytest.approx(TRUTH[1], abs=1e-6)


def test_orientation_survives_small_noise():
    rng = np.random.default_rng(42)
    dataset = synthetic_dataset(rng=rng, noise=TWO_PI * 5e3)
    result = fit_orientation(dataset, (TRUTH[0] + 0.01, TRUTH[1] - 0.01, TRUTH[2]))
    assert result.converged
    assert result.parameters["theta_x"] == pytest.approx(TRUTH[0], abs=5e-3)
    assert result.parameters["theta_y"] == pytest.approx(TRUTH[1], abs=5e-3)


def test_orientation_axis_aligned_field_recovers_direction():
    # On the symmetry axis every defect axis sees the same projection, so a
    # tilt only enters the spectrum at second order; the direction comes back
    # to a fraction of a degree rather than machine precision.
    dataset = synthetic_dataset(angles=(0.0, 0.0, 0.0))
    result = fit_orientation(dataset, (0.01, -0.01, 0.0))
    fitted_hat = rotate_to_unit_vector(
        result.parameters["theta_x"], result.parameters["theta_y"], 0.0
    )
    assert result.converged
    assert abs(float(fitted_hat[2])) > 1.0 - 5e-4


def test_orientation_fit_input_validation():
    dataset = synthetic_dataset()
    with pytest.raises(ValueError, match="3 distinct field"):
        fit_orientation(OdmrDataset(records=dataset.records[:2]), TRUTH)
    broken = dataset.records[:4] + ((9e-3, (TWO_PI * 2.9e9,)),)
    with pytest.raises(ValueError, match="2 lines per record"):
        fit_orientation(OdmrDataset(records=broken), TRUTH)
    with pytest.raises(ValueError, match="three finite"):
        fit_orientation(dataset, (0.0, 0.1))
    with pytest.raises(ValueError, match="three finite"):
        fit_orientation(dataset, (0.0, math.nan, 0.0))


def test_odmr_dataset_canonicalizes_and_validates():
    ds = OdmrDataset(records=((5e-3, (3.0, 1.0, 2.0)), (1e-3, (4.0,))))
    assert ds.records == ((1e-3, (4.0,)), (5e-3, (1.0, 2.0, 3.0)))
    with pytest.raises(ValueError, match="at least one record"):
        OdmrDataset(records=())
    with pytest.raises(ValueError, match="magnitude"):
        OdmrDataset(records=((-1e-3, (1.0,)),))
    with pytest.raises(ValueError, match="at least one line"):
        OdmrDataset(records=((1e-3, ()),))
    with pytest.raises(ValueError, match="finite and positive"):
        OdmrDataset(records=((1e-3, (0.0,)),))


CAVITY_TRUTH = (TWO_PI * 2.53e9, TWO_PI * 253e3, TWO_PI * 367e3)


def cavity_trace(n=101, half_span=3e6):
    omega = CAVITY_TRUTH[0] + TWO_PI * np.linspace(-half_span, half_span, n)
    return omega, cavity_reflectivity_model(omega, *CAVITY_TRUTH)


def test_cavity_lineshape_round_trip():
    omega, r_c = cavity_trace()
    guess = (CAVITY_TRUTH[0] + TWO_PI * 0.2e6, TWO_PI * 200e3, TWO_PI * 400e3)
    result = fit_cavity_lineshape(omega, r_c, guess)
    assert result.converged
    assert result.parameters["omega_c"] == pytest.approx(CAVITY_TRUTH[0], rel=1e-9)
    assert result.parameters["gamma_c"] == pytest.approx(CAVITY_TRUTH[1], rel=1e-6)
    assert result.parameters["gamma_f"] == pytest.approx(CAVITY_TRUTH[2], rel=1e-6)
    assert result.residual_norm < 1e-9


def test_cavity_lineshape_coupling_order_flag():
    omega, r_c = cavity_trace()
    guess = (CAVITY_TRUTH[0], TWO_PI * 300e3, TWO_PI * 310e3)
    over = fit_cavity_lineshape(omega, r_c, guess, overcoupled=True)
    under = fit_cavity_lineshape(omega, r_c, guess, overcoupled=False)
    assert over.parameters["gamma_f"] >= over.parameters["gamma_c"]
    assert under.parameters["gamma_f"] <= under.parameters["gamma_c"]
    # Same unordered pair either way; the data cannot tell the rates apart.
    assert over.parameters["gamma_f"] == pytest.approx(under.parameters["gamma_c"], rel=1e-9)
    assert over.parameters["gamma_c"] == pytest.approx(under.parameters["gamma_f"], rel=1e-9)


def test_cavity_lineshape_edge_dip_warns():
    omega = CAVITY_TRUTH[0] + TWO_PI * np.linspace(0.5e6, 3e6, 50)
    r_c = cavity_reflectivity_model(omega, *CAVITY_TRUTH)
    with pytest.warns(UserWarning, match="edge"):
        fit_cavity_lineshape(omega, r_c, CAVITY_TRUTH)


def test_cavity_lineshape_rejects_bad_traces():
    omega, r_c = cavity_trace()
    with pytest.raises(ValueError, match="flat"):
        fit_cavity_lineshape(omega, np.full_like(omega, 0.5), CAVITY_TRUTH)
    with pytest.raises(ValueError, match="at least 4"):
        fit_cavity_lineshape(omega[:3], r_c[:3], CAVITY_TRUTH)
    with pytest.raises(ValueError, match="non-finite"):
        fit_cavity_lineshape(omega, np.where(omega > CAVITY_TRUTH[0], np.nan, r_c), CAVITY_TRUTH)
    with pytest.raises(ValueError, match="same length"):
        fit_cavity_lineshape(omega, r_c[:-1], CAVITY_TRUTH)
    with pytest.raises(ValueError, match="initial guess"):
        fit_cavity_lineshape(omega, r_c, (1.0, 2.0))


LORENTZ_TRUTH = {"center": TWO_PI * 2.53e9, "fwhm": TWO_PI * 13.5e6,
                 "depth": 0.7, "offset": 0.97}


def lorentz_trace(n=401, half_span=50e6):
    omega = LORENTZ_TRUTH["center"] + TWO_PI * np.linspace(-half_span, half_span, n)
    signal = lorentzian_dip_model(
        omega, LORENTZ_TRUTH["center"], LORENTZ_TRUTH["fwhm"] / 2.0,
        LORENTZ_TRUTH["depth"], LORENTZ_TRUTH["offset"],
    )
    return omega, signal


def test_lorentzian_fwhm_round_trip():
    omega, signal = lorentz_trace()
    result = fit_lorentzian_fwhm(omega, signal)
    assert result.converged
    assert result.parameter_order == ("center", "fwhm", "depth", "offset")
    assert result.parameters["center"] == pytest.approx(LORENTZ_TRUTH["center"], rel=1e-12)
    assert result.parameters["fwhm"] == pytest.approx(LORENTZ_TRUTH["fwhm"], rel=1e-6)
    assert result.parameters["depth"] == pytest.approx(LORENTZ_TRUTH["depth"], rel=1e-6)
    assert result.parameters["offset"] == pytest.approx(LORENTZ_TRUTH["offset"], rel=1e-6)


def test_lorentzian_fwhm_input_order_is_irrelevant():
    omega, signal = lorentz_trace(n=101)
    forward = fit_lorentzian_fwhm(omega, signal)
    backward = fit_lorentzian_fwhm(omega[::-1].copy(), signal[::-1].copy())
    assert forward.parameters == backward.parameters


def test_lorentzian_fwhm_multi_dip_warns_and_fits_deepest():
    # Second dip 30 MHz away: shallower than the main one but well past the
    # half-depth level, so the run detector sees two separated dips.
    center2 = LORENTZ_TRUTH["center"] + TWO_PI * 30e6
    omega, signal = lorentz_trace()
    hw2 = TWO_PI * 2e6
    signal = signal - 0.45 * hw2**2 / ((omega - center2) ** 2 + hw2**2)
    with pytest.warns(UserWarning, match="separated dips"):
        result = fit_lorentzian_fwhm(omega, signal)
    assert abs(result.parameters["center"] - LORENTZ_TRUTH["center"]) < TWO_PI * 2e6


def test_lorentzian_fwhm_rejects_bad_traces():
    omega, signal = lorentz_trace(n=11)
    with pytest.raises(ValueError, match="no dip"):
        fit_lorentzian_fwhm(omega, np.full_like(omega, 0.97))
    with pytest.raises(ValueError, match="at least 5"):
        fit_lorentzian_fwhm(omega[:4], signal[:4])
    with pytest.raises(ValueError, match="same length"):
        fit_lorentzian_fwhm(omega, signal[:-1])


def test_load_odmr_csv_units_and_raggedness(tmp_path):
    path = tmp_path / "lines.csv"
    path.write_text(
        "b_t,f1_hz,f2_hz\n"
        "# comment row\n"
        "0.005,2.8e9,2.95e9\n"
        "0.002,2.86e9\n"
    )
    dataset = load_odmr_csv(path)
    assert dataset.records == (
        (0.002, (TWO_PI * 2.86e9,)),
        (0.005, (TWO_PI * 2.8e9, TWO_PI * 2.95e9)),
    )


def test_load_odmr_csv_errors(tmp_path):
    short = tmp_path / "short.csv"
    short.write_text("0.005,2.8e9\n0.006\n")
    with pytest.raises(ValueError, match=r"short\.csv:2: need B_T"):
        load_odmr_csv(short)
    unparsable = tmp_path / "mid_header.csv"
    unparsable.write_text("0.005,2.8e9\nb_t,f_hz\n")
    with pytest.raises(ValueError, match=r"mid_header\.csv:2: non-numeric"):
        load_odmr_csv(unparsable)
    empty = tmp_path / "empty.csv"
    empty.write_text("# only comments\n")
    with pytest.raises(ValueError, match="no data rows"):
        load_odmr_csv(empty)


def test_load_trace_csv_round_trip(tmp_path):
    path = tmp_path / "trace.csv"
    freqs = [2.528e9, 2.53e9, 2.532e9]
    vals = [0.91, 0.034, 0.89]
    path.write_text("freq_hz,r\n" + "".join(f"{f!r},{v!r}\n" for f, v in zip(freqs, vals)))
    omega, values = load_trace_csv(path)
    assert np.array_equal(omega, TWO_PI * np.asarray(freqs))
    assert np.array_equal(values, np.asarray(vals))
    bad = tmp_path / "threecol.csv"
    bad.write_text("1e9,0.5,0.1\n")
    with pytest.raises(ValueError, match="expected 2 columns, got 3"):
        load_trace_csv(bad)
