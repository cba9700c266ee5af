"""Regenerate the histogram fixtures used by the example configs."""

from pathlib import Path

from walkoff.grids import Axis
from walkoff.io import write_histogram
from walkoff.spectrum import PropagationSetting, joint_intensity, propagate_angular_spectrum
from walkoff.state import AnsatzParams, build_ansatz_wavefunction

HERE = Path(__file__).parent
AXIS = Axis.symmetric(16.0, 64)


def plane(rho, mu):
    st = build_ansatz_wavefunction(AnsatzParams(w_phi=4, xi=-2, rho=rho, x0=30, w_p=6), AXIS)
    psi = propagate_angular_spectrum(st, PropagationSetting(mu), boundary_tol=0.1)
    return joint_intensity(psi, z=mu, magnification=4.0)


if __name__ == "__main__":
    write_histogram(HERE / "separable_mu1.txt", plane(float("inf"), 1.0), delimiter=" ")
    write_histogram(HERE / "separable_mu2.txt", plane(float("inf"), 2.0), delimiter=" ")
    write_histogram(HERE / "curved_mu4.txt", plane(8.0, 4.0), delimiter=" ")
