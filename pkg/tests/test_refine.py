import numpy as np
import pytest

from greedygrid.errors import NoOverlapError
from greedygrid.geometry import RigidTransform, apply_transform, euler_to_matrix
from greedygrid.metrics import rre, rte
from greedygrid.refine import IcpConfig, estimate_normals, icp_refine, kabsch
from greedygrid.synthetic import asymmetric_object

from conftest import random_rotation


@pytest.fixture
def cloud(rng):
    return asymmetric_object(rng, 3000)


def test_kabsch_exact(rng):
    P = rng.normal(size=(50, 3))
    T = RigidTransform(random_rotation(rng), rng.normal(size=3))
    est = kabsch(P, apply_transform(P, T))
    np.testing.assert_allclose(est.rotation, T.rotation, atol=1e-9)
    np.testing.assert_allclose(est.translation, T.translation, atol=1e-9)


def test_kabsch_never_reflects(rng):
    P = rng.normal(size=(30, 3))
    Q = P * np.array([1.0, 1.0, -1.0])  # mirror image: best proper rotation, not a reflection
    assert np.linalg.det(kabsch(P, Q).rotation) == pytest.approx(1.0)


def test_aligned_clouds_converge_immediately(cloud):
    res = icp_refine(cloud, cloud, RigidTransform.identity(), IcpConfig(0.1))
    assert res.converged and res.iterations <= 2
    assert res.mse_history[-1] < 1e-20
    assert res.fitness == 1.0


@pytest.mark.parametrize("variant", ["point_to_point", "point_to_plane"])
def test_small_perturbation_recovered(cloud, variant):
    truth = RigidTransform(euler_to_matrix((2.0, -1.0, 1.5)), [0.02, -0.01, 0.015])
    source = apply_transform(cloud, truth.inverse())
    res = icp_refine(source, cloud, RigidTransform.identity(), IcpConfig(0.12, variant=variant))
    assert rre(truth.rotation, res.transform.rotation) < 0.1
    assert rte(truth.translation, res.transform.translation) < 0.001


def test_mse_never_increases(rng, cloud):
    for _ in range(5):
        truth = RigidTransform(euler_to_matrix(rng.uniform(-8, 8, 3)), rng.uniform(-0.05, 0.05, 3))
        source = apply_transform(cloud, truth.inverse()) + rng.normal(scale=0.003, size=cloud.shape)
        hist = icp_refine(source, cloud, RigidTransform.identity(), IcpConfig(0.12)).mse_history
        assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_disjoint_clouds(cloud):
    with pytest.raises(NoOverlapError, match="no overlap at initialization"):
        icp_refine(cloud + 100.0, cloud, RigidTransform.identity(), IcpConfig(0.12))


def test_normals_on_plane(rng):
    pts = np.column_stack([rng.uniform(0, 1, 300), rng.uniform(0, 1, 300), np.zeros(300)])
    n = estimate_normals(pts, 10)
    np.testing.assert_allclose(np.abs(n[:, 2]), 1.0, atol=1e-9)


def test_config_validation():
    assert IcpConfig.for_resolution(0.06).max_correspondence_dist_m == pytest.approx(0.12)
    with pytest.raises(ValueError):
        IcpConfig(0.0)
    with pytest.raises(ValueError):
        IcpConfig(0.1, variant="gicp")
