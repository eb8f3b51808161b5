import numpy as np
import pytest

from hamshade.errors import IndexOutOfRange, OrbitEscaped
from hamshade.hamsys import harmonic, henon_heiles, on_energy_level, saddle_center
from hamshade.spectra import (lyapunov_spectrum, spectrum_diagnostics, two_trajectory_estimate,
                              volume_growth, write_spectrum_csv)


def test_diagnostics_examples():
    assert spectrum_diagnostics([1.0, -1.0]) == {"pairing_defect": 0.0, "sum_defect": 0.0}
    d = spectrum_diagnostics([0.5, 0.1, -0.1, -0.5])
    assert d["pairing_defect"] == 0.0 and d["sum_defect"] == 0.0


def test_volume_growth_examples():
    assert volume_growth([1.0, -1.0], 1) == 1.0
    assert volume_growth([0.5, 0.1, -0.1, -0.5], 2) == pytest.approx(0.6)
    assert volume_growth([0.5, 0.1, -0.1, -0.5], 4) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(IndexOutOfRange):
        volume_growth([1.0, -1.0], 3)


def test_harmonic_spectrum_vanishes():
    spec = lyapunov_spectrum(harmonic(), [1.0, 0.0, 0.0, 0.5], 1e3)
    assert np.max(np.abs(spec.exponents)) <= 1e-3
    assert spec.exponents.size == 2


def test_saddle_center_rates():
    spec = lyapunov_spectrum(saddle_center(), [0.0, 1.0, 0.0, 0.0], 1e3)
    np.testing.assert_allclose(spec.exponents, [1.0, -1.0], atol=2e-2)
    full = lyapunov_spectrum(saddle_center(), [0.0, 1.0, 0.0, 0.0], 1e2, full=True)
    np.testing.assert_allclose(full.exponents, [1.0, 0.0, 0.0, -1.0], atol=2e-2)


def test_off_plane_start_escapes():
    # q1 p1 stays constant while q1 grows like e^t: the orbit leaves any bounded region
    with pytest.raises(OrbitEscaped):
        lyapunov_spectrum(saddle_center(), [1.0, 0.1, 0.5, 0.0], 1e3)


@pytest.mark.slow
def test_henon_heiles_chaotic_exponent_cross_check():
    sys = henon_heiles()
    x = on_energy_level(sys, [0.0, -0.2, 0.3, 0.05], 1 / 8, 2)
    spec = lyapunov_spectrum(sys, x, 1e4)
    lam = spec.exponents[0]
    assert lam > 0.01
    assert spec.pairing_defect <= 5e-3 and spec.sum_defect <= 5e-3
    other = two_trajectory_estimate(sys, x, 1e4)
    assert abs(other - lam) <= 0.1 * lam


def test_spectrum_csv(tmp_path):
    spec = lyapunov_spectrum(harmonic(), [1.0, 0.0, 0.0, 0.5], 20.0, progress_every=5.0)
    path = tmp_path / "l.csv"
    write_spectrum_csv(path, spec)
    lines = path.read_text().splitlines()
    assert lines[0] == "T,lambda_1,lambda_2,pairing_defect,sum_defect"
    assert len(lines) == 5
    assert float(lines[-1].split(",")[0]) == 20.0
