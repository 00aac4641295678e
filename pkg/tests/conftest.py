import pytest

from ridepool import create_app
from ridepool.models.matching import ConstraintSet
from ridepool.services.road_network import DistanceOracle, generate_grid


@pytest.fixture
def app(tmp_path):
    return create_app({
        "TESTING": True,
        "OUTPUT_DIR": str(tmp_path / "output"),
        "JOBS": 1,
    })


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def grid():
    return generate_grid(5, 5, 100.0)


@pytest.fixture
def grid_oracle(grid):
    return DistanceOracle(grid)


@pytest.fixture
def constraints():
    return ConstraintSet(max_pickup_time=900.0, max_detour_ratio=0.5, max_wait_time=300.0,
                         matching_radius_time=900.0)
