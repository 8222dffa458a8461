"""Prompt templates with a single {question} placeholder.

Defaults ship with the package; callers may point at their own text files.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError


@dataclass(frozen=True)
class PromptTemplate:
    text: str

    def render(self, question: str) -> str:
        return self.text.replace("{question}", question)

    @classmethod
    def from_file(cls, path) -> "PromptTemplate":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"prompt template not found: {path}")
        return cls(path.read_text())


def default_relevance_template() -> PromptTemplate:
    return PromptTemplate(resources.files("sfa").joinpath("prompts/relevance.txt").read_text())


def default_answer_template() -> PromptTemplate:
    return PromptTemplate(resources.files("sfa").joinpath("prompts/answer.txt").read_text())
