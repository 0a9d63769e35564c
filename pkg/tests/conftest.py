import pytest

from nozzleflow import (
    Cylinder,
    DensityRelation,
    GasLaw,
    TanhExpansion,
    TruncatedDensity,
    build_mesh,
    newton_solve,
)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile (or load from cache) the jitted kernels on a tiny problem so
    # timed sections measure solves, not compilation.
    rel = DensityRelation(GasLaw(1.4))
    tr = TruncatedDensity(rel, 0.05)
    mesh = build_mesh(Cylinder(r0=0.5, dim=2), 1.0, 2, 4)
    newton_solve(mesh, tr, 0.1)
    mesh3 = build_mesh(Cylinder(r0=0.5, dim=3), 1.0, 2, 4)
    newton_solve(mesh3, tr, 0.05)
    yield


@pytest.fixture(scope="session")
def relation():
    return DensityRelation(GasLaw(1.4))


@pytest.fixture(scope="session")
def trunc(relation):
    return TruncatedDensity(relation, 0.05)


@pytest.fixture(scope="session")
def unit_cylinder():
    """|S| = 1 in 2D."""
    return Cylinder(r0=0.5, dim=2)


@pytest.fixture(scope="session")
def tanh_profile():
    return TanhExpansion(r_in=0.5, r_out=1.0, length=1.0, dim=2)
