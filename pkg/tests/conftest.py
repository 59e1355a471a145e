import pytest


def pytest_addoption(parser):
    parser.addoption("--longrun", action="store_true", default=False,
                     help="also run the finest table rows (several hours)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--longrun"):
        return
    skip = pytest.mark.skip(reason="needs --longrun")
    for item in items:
        if "longrun" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def acceptance_lines(request):
    lines = []
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
