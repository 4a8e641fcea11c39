from __future__ import annotations

import pytest

from ideatree.corpus import Problem, TestCase


@pytest.fixture
def problem() -> Problem:
    return Problem(
        id="toy",
        statement="Read one integer and print the matching letter.",
        public_tests=(TestCase(input="1\n", expected_output="A\n"),),
        private_tests=(TestCase(input="2\n", expected_output="B\n"),),
    )
