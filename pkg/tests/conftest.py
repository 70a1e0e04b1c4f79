import numpy as np
import pytest

from bubblesim.corpus import ArticleUtility, CorpusSpec, Stance, default_templates, generate_articles, generate_users

# Filled by tests/test_acceptance.py; echoed after the run so the per-criterion
# lines are visible without -s.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_articles(rng):
    return generate_articles(CorpusSpec(100, multi_topic_prob=0.2, max_topics_per_article=2), rng)


@pytest.fixture
def small_users(rng):
    return generate_users(2, default_templates(), rng)


def article(article_id=0, topics=(0,), stance=0):
    return ArticleUtility(article_id, tuple(topics), Stance(stance))
