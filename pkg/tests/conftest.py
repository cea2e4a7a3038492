import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from optotrap.config import default_config, preset_config
from optotrap.spring import k0


def exact_roots(config):
    """All roots of the linearized mirror + single-pole-cavity system.

    Each field contributes a stiffness K0 gamma^2 / ((s + gamma)^2 + delta^2);
    clearing denominators gives a polynomial in z = s / gamma.
    """
    m = config.reduced_mass
    g = config.derived.linewidth_hwhm
    wm = config.mirrors.natural_frequency
    mech = np.array([m * wm ** 2, m * config.mirrors.mechanical_damping * g, m * g ** 2])
    dens, nums = [], []
    for inp in config.spring_inputs():
        x = inp.field.detuning
        dens.append(np.array([1 + x * x, 2.0, 1.0]))
        nums.append(k0(inp))
    total = mech
    for d in dens:
        total = P.polymul(total, d)
    for i, kk in enumerate(nums):
        term = np.array([kk])
        for j, d in enumerate(dens):
            if j != i:
                term = P.polymul(term, d)
        total = P.polyadd(total, term)
    return P.polyroots(total) * g


@pytest.fixture
def cfg():
    return default_config()


@pytest.fixture(params=["a", "b", "c", "d"])
def preset(request):
    return request.param, preset_config(request.param)
