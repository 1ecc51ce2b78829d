import pytest

from rolereward.judge import JudgeClient, MockJudgeBackend, fixture_key
from rolereward.templates import get_template


class FixtureMap:
    """Accumulates mock-judge fixtures keyed by prompt hash."""

    def __init__(self):
        self.fixtures = {}
        self.prompts = {}

    def add(self, template_id, output, **args):
        prompt = get_template(template_id).render(**args)
        self.fixtures[fixture_key(prompt)] = output
        self.prompts[prompt] = output
        return prompt

    def add_prompt(self, prompt, output):
        self.fixtures[fixture_key(prompt)] = output
        self.prompts[prompt] = output

    def client(self, **kwargs):
        return JudgeClient(MockJudgeBackend(self.fixtures, strict=True), **kwargs)


@pytest.fixture
def fixture_map():
    return FixtureMap()
