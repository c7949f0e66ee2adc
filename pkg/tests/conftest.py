from collections import defaultdict

CRITERIA = {
    1: "Monte Carlo reproduces the recovery curve",
    2: "point values at pd=0.5, B=1",
    3: "B=0 degenerate limit",
    4: "monotonicity and loss identity",
    5: "withdrawal-adjusted default rate arithmetic",
    6: "calibration round trip",
    7: "recovery curve predicted from a loss-only fit",
    8: "negative PD-RR correlation on rolling cohorts",
    9: "numerics and reproducibility",
}

_outcomes: dict[int, list[tuple[str, bool]]] = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _outcomes[marker.args[0]].append((item.name, call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, label in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            continue
        failed = [name for name, ok in results if not ok]
        verdict = "FAIL" if failed else "PASS"
        detail = f"  (failed: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {n}: {verdict}  {label}{detail}")

