import pytest

from ctsim.world import AgentState, make_world


@pytest.fixture
def line_world():
    """Hub at the origin, three locations on the x axis, one agent of speed 2."""

    def build(rates=(0.0, 0.0, 0.0), counts=None, capacity=10, horizon=100, seed=0, agents=None):
        positions = [(0, 0), (4, 0), (10, 0), (20, 0)]
        if agents is None:
            agents = [AgentState(0, 2.0, capacity)]
        return make_world(
            positions,
            (0.0,) + tuple(rates),
            agents,
            horizon,
            seed=seed,
            counts=counts,
        )

    return build


class Recorder:
    """Wraps a controller and remembers what it decided each tick."""

    def __init__(self, controller):
        self.controller = controller
        self.log = []

    def __call__(self, world, idle, observations):
        out = self.controller(world, idle, observations)
        self.log.append(dict(out))
        return out


@pytest.fixture
def recorder():
    return Recorder


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def criterion():
    """Record one acceptance line; use as ``criterion(name, ok, detail)`` before asserting."""

    def record(name, ok, detail):
        ACCEPTANCE.append((name, bool(ok), detail))
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        return ok

    return record
