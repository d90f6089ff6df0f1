import pytest

from nmrcartan import cartan, targets

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    """Collects one summary line per acceptance criterion."""
    return request.config.stash[_LINES]


@pytest.fixture(scope="session")
def synth_run():
    """Memoised 512-start searches shared across test modules."""
    cache = {}

    def get(label, starts=512, seed=0):
        key = (label, starts, seed)
        if key not in cache:
            target = targets.resolve(targets.parse_target(label))
            cache[key] = cartan.synthesize(target, cartan.SearchConfig(num_starts=starts, seed=seed))
        return cache[key]

    return get
