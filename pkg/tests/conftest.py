import numpy as np
import pytest

from pmdrive import MachineParams, SaturationMaps, get_preset


@pytest.fixture
def spmsm() -> MachineParams:
    return get_preset("spmsm_9s6p")


@pytest.fixture
def ipmsm() -> MachineParams:
    return get_preset("ipmsm_9s6p")


@pytest.fixture
def lq_ramp_maps(ipmsm) -> SaturationMaps:
    """Synthetic maps: lq falls linearly with iq, everything else constant."""
    grid_id = np.array([-200.0, 0.0, 200.0])
    grid_iq = np.array([0.0, 200.0])
    lq_col0 = np.full(3, 155.52e-6)
    lq_col1 = np.full(3, 100.0e-6)
    return SaturationMaps(
        grid_id=grid_id,
        grid_iq=grid_iq,
        lambda_m_of_iq=np.full(2, ipmsm.lambda_m),
        ld_of_idiq=np.full((3, 2), ipmsm.Ld),
        lq_of_idiq=np.column_stack([lq_col0, lq_col1]),
    )
