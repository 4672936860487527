import numpy as np
import pytest

from parakernel.errors import ModeUnavailable
from parakernel.halfspace import HalfspaceKernel
from parakernel.oracle import OracleKernel, _y_stencil
from parakernel.paths import make_path

DIAG = make_path([0, 0.5, 1], [np.diag([1.0, 0.6]), np.diag([0.5, 1.2])], 0.1, 2)
X = np.array([[0.1, 0.2], [0.4, 0.6], [-0.3, 0.05]])
Y = np.array([0.2, 0.4])


@pytest.mark.parametrize("kind,alpha,beta", [("dirichlet", (0, 0), (0, 0)),
                                             ("neumann", (0, 0), (0, 0)),
                                             ("dirichlet", (0, 1), (0, 0)),
                                             ("neumann", (0, 0), (0, 1))])
def test_oracle_matches_closed_form_within_its_tag(kind, alpha, beta):
    ref = getattr(HalfspaceKernel(DIAG), kind)(X, Y, 0.8, 0.1, alpha, beta)
    orc = OracleKernel(DIAG, h=0.05)
    got = getattr(orc, kind)(X, Y, 0.8, 0.1, alpha, beta)
    assert np.max(np.abs(got - ref)) <= orc.last_error
    # the tag bounds the unextrapolated fine value, so it is loose for the returned one
    assert np.max(np.abs(got - ref)) < 0.02 * np.max(np.abs(ref))
    assert orc.last_error < 0.2 * np.max(np.abs(ref))


def test_oracle_handles_varying_shear():
    # no closed form exists; the two-sided identity D_{x_n} N = -D_{y_n} D still holds
    p = make_path([0, 0.5, 1], [np.array([[1.0, 0.3], [0.3, 0.75]]),
                                np.array([[0.6, 0.2], [0.2, 1.0]])], 0.1, 2)
    k = HalfspaceKernel(p)
    assert k.mode == "oracle"
    v = k.dirichlet(np.array([[0.3, 0.0]]), Y, 0.8, 0.1)
    assert abs(v[0]) < 1e-12


def test_start_up_time_guard():
    with pytest.raises(ModeUnavailable):
        OracleKernel(DIAG, h=0.2).dirichlet(X, Y, 0.12, 0.1)


def test_y_stencil_weights():
    st = _y_stencil((0, 2), 0.1)
    assert sum(c for _, c in st) == pytest.approx(0.0)
    assert sum(c * sh[1] ** 2 for sh, c in st) == pytest.approx(2.0)
