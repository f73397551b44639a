import os

import pytest
from hypothesis import HealthCheck, settings

from nxdga.domain import SuffixList
from nxdga.features import MarkovGibberishModel
from nxdga.segment import UnigramLexicon

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=1000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def lexicon():
    return UnigramLexicon.bundled()


@pytest.fixture(scope="session")
def suffixes():
    return SuffixList.bundled()


@pytest.fixture(scope="session")
def markov():
    return MarkovGibberishModel.bundled()
