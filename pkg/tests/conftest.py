import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the synth helper module

import synth  # noqa: E402
from idskit.dataset import ClassLabel, fit_encode, parse_kdd  # noqa: E402


@pytest.fixture(scope="session")
def kdd_fixture_text():
    return synth.kdd_text(seed=7)


@pytest.fixture(scope="session")
def kdd_fixture_raw(kdd_fixture_text):
    return parse_kdd(kdd_fixture_text)


@pytest.fixture(scope="session")
def kdd_fixture_encoded(kdd_fixture_raw):
    return fit_encode(kdd_fixture_raw)


@pytest.fixture(scope="session")
def small_stratified_fixture():
    """1,000-row stratified fixture for pipeline-level tests."""
    text = synth.kdd_text(
        {
            ClassLabel.NORMAL: 400,
            ClassLabel.PROBE: 80,
            ClassLabel.DOS: 430,
            ClassLabel.U2R: 30,
            ClassLabel.R2L: 60,
        },
        seed=11,
    )
    return fit_encode(parse_kdd(text))
