"""Shared fixtures plus the acceptance-criteria summary printer."""

import numpy as np
import pytest

from slidesim import CorpusSpec, generate_synthetic_corpus, load_manifest


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label): one pipeline acceptance criterion"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker and (report.when == "call" or (report.when == "setup" and report.skipped)):
        report.acceptance_label = marker.kwargs.get("label", item.name)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = []
    for status in ("passed", "failed", "skipped"):
        for report in terminalreporter.stats.get(status, []):
            label = getattr(report, "acceptance_label", None)
            if label:
                lines.append((label, status.upper()))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for label, status in lines:
        terminalreporter.write_line(f"{status:>7}  {label}")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """2 classes x 2 slides with a 448x448 level (2x2 patch grid) at 1x."""
    out = tmp_path_factory.mktemp("small_corpus")
    spec = CorpusSpec(
        classes=("alpha", "beta"),
        slides_per_class=2,
        levels={"1x": (448, 448)},
    )
    manifest = generate_synthetic_corpus(spec, out, seed=11)
    return manifest


@pytest.fixture(scope="session")
def small_slides(small_corpus):
    return load_manifest(small_corpus)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
