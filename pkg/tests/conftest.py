import pytest

from lipvar.domain_field import (
    DomainConfig,
    LipschitzGraph,
    arc_indicator,
    build_domain,
    harmonic_extension,
)

# Shared lazily built domains.  Unit tests run on coarse boxes; the
# closed-form comparisons use the halfplane far-field closure where the
# truncation bias is gone and only the discretization is under test.


def _domain_with_u(cfg, arc=(-1.0, 1.0)):
    domain = build_domain(cfg)
    u = harmonic_extension(domain, arc_indicator(domain, *arc))
    return domain, u


@pytest.fixture(scope="session")
def flat_small():
    cfg = DomainConfig(LipschitzGraph.flat(), box_halfwidth=5.0, box_height=5.0,
                       grid_spacing=0.1, pole=(0.0, 1.0))
    return _domain_with_u(cfg)


@pytest.fixture(scope="session")
def saw_small():
    graph = LipschitzGraph.sawtooth(amplitude=0.5, n_teeth=2, support_radius=1.0)
    cfg = DomainConfig(graph, box_halfwidth=5.0, box_height=5.0,
                       grid_spacing=0.1, pole=(0.0, 1.0))
    return _domain_with_u(cfg)


@pytest.fixture(scope="session")
def oracle_flat():
    cfg = DomainConfig(LipschitzGraph.flat(), box_halfwidth=8.0, box_height=8.0,
                       grid_spacing=0.05, pole=(0.0, 1.0), far_field="halfplane")
    return _domain_with_u(cfg)


@pytest.fixture(scope="session")
def kernel_flat():
    cfg = DomainConfig(LipschitzGraph.flat(), box_halfwidth=8.0, box_height=8.0,
                       grid_spacing=0.05, pole=(0.0, 1.0))
    return _domain_with_u(cfg)
