import pytest

from polgen.worldmap import generate_map, save_map


@pytest.fixture(scope="session")
def small_map():
    return generate_map(
        3000, 3000,
        {"home": 40, "workplace": 6, "restaurant": 8, "recreation": 5},
        seed=11)


@pytest.fixture(scope="session")
def small_map_path(small_map, tmp_path_factory):
    path = tmp_path_factory.mktemp("maps") / "small.map"
    save_map(small_map, path)
    return str(path)


@pytest.fixture(scope="session")
def minimal_map():
    return generate_map(
        1000, 1000,
        {"home": 1, "workplace": 1, "restaurant": 1, "recreation": 1},
        seed=7)
