import math

import pytest

from alphadecay.params import (
    CostDistribution,
    CostKind,
    LambdaRegime,
    MarketParams,
    ModelParams,
    SignalSpec,
    baseline_params,
)


@pytest.fixture(scope="session")
def baseline():
    return baseline_params(phi=0.7)


@pytest.fixture(scope="session")
def multi_equilibria_params():
    """Committed fixture producing the stable / tipping / stable pattern,
    with best-response slopes gentle enough that naive tatonnement
    converges at both stable points."""
    return ModelParams(
        n_institutions=100,
        k_signals=1,
        phi=0.5,
        signals=(SignalSpec(theta=0.012, sigma0_sq=0.02, rho=0.6, a=0.001, g=0.02),),
        market=MarketParams(lambda_regime=LambdaRegime.CONSTANT, lambda0=0.3,
                            sigma_eta=0.6, sigma_h=1.2),
        gamma=1.0,
        d_bench=0.0,
        cost_dist=CostDistribution(kind=CostKind.LOGNORMAL,
                                   params=(math.log(0.5), 0.6)),
    )


@pytest.fixture(scope="session")
def cascade_fixture():
    """Five heterogeneous signals ordered by vulnerability; at phi = 0.9 the
    whole set extinguishes sequentially, the last two only after the
    capital reallocated from earlier extinctions lowers their thresholds."""
    rhos = (0.95, 0.60, 0.36, 0.21, 0.12)
    gs = (0.0002, 0.0005, 0.00125, 0.0015, 0.0015)
    signals = tuple(
        SignalSpec(theta=1.0, sigma0_sq=0.02, rho=r, a=1.8, g=g)
        for r, g in zip(rhos, gs)
    )
    return ModelParams(n_institutions=100, k_signals=5, phi=0.9, signals=signals,
                       kappa=1.0, i_max=10.0, beta=0.25)
