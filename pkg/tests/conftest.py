"""Shared fixtures: the test corpus, an encode memo, and the acceptance report."""

import pytest

from fic import bench, codec

CORPUS_SEED = 7


@pytest.fixture(scope="session")
def corpus():
    pytest.importorskip("skimage", reason="standard test images need scikit-image")
    images = bench.default_corpus(seed=CORPUS_SEED, size=256)
    assert "camera" in images
    return images


class EncodeCache:
    """Session-wide encode memo so acceptance and unit tests share results.

    Cached wall times are stale by design; tests that care about timing must
    encode fresh.
    """

    def __init__(self, images):
        self.images = images
        self._store = {}

    def get(self, name, strategy, stride=4, isometries=False, workers=1):
        key = (name, strategy, stride, isometries, workers)
        if key not in self._store:
            self._store[key] = codec.encode(
                self.images[name],
                strategy,
                stride=stride,
                isometries=isometries,
                workers=workers,
            )
        return self._store[key]

    def items(self):
        return self._store.items()


@pytest.fixture(scope="session")
def encodes(corpus):
    return EncodeCache(corpus)


_acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance():
    """Recorder for the per-criterion verdict lines printed after the run."""

    def record(number, ok, detail):
        _acceptance_lines.append((number, bool(ok), detail))

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, ok, detail in sorted(_acceptance_lines):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[criterion {number:2d}] {verdict}  {detail}")
