"""Exception types raised across the harness.

They are collected here because several are shared between modules (the CLI
catches ``HarnessError`` as the "expected failure" boundary).
"""


class HarnessError(Exception):
    """Base class for every error this package raises deliberately."""


# -- corpus ------------------------------------------------------------------

class MalformedFile(HarnessError):
    """A dataset file could not be read or parsed at all."""


class SchemaViolation(HarnessError):
    """A dataset parsed but breaks an invariant; message names the problem id."""


class EmptyResult(HarnessError):
    """A filter removed every problem (almost always a misconfigured window)."""


# -- gateway -----------------------------------------------------------------

class AuthError(HarnessError):
    """The provider rejected our credentials. Never retried."""


class TransientProviderError(HarnessError):
    """A retryable provider failure (rate limit, 5xx, network)."""


class ProviderExhausted(HarnessError):
    """All retry attempts for one request were spent."""


class BudgetExceeded(HarnessError):
    """The run's generated-token ceiling has been crossed."""


# -- search ------------------------------------------------------------------

class FormatError(HarnessError):
    """No usable fenced code block in a model response."""


class SketchEmpty(HarnessError):
    """A sketch-producing call returned empty text."""


# -- executor ----------------------------------------------------------------

class SandboxUnavailable(HarnessError):
    """The execution backend is missing or broke protocol; aborts the run."""


# -- metrics -----------------------------------------------------------------

class EmptyDataset(HarnessError):
    """Statistics were requested over zero problems."""


class ZeroBaseline(HarnessError):
    """Relative curves need a strictly positive baseline pass@1."""


class EmptyGroup(HarnessError):
    """Conditioning analysis received no records."""


# -- diversity ---------------------------------------------------------------

class TooFewCandidates(HarnessError):
    """Diversity needs at least two code-bearing candidates."""


class InsufficientRuns(HarnessError):
    """The diversity-vs-gain report needs at least three runs."""


# -- orchestrator ------------------------------------------------------------

class ConfigError(HarnessError):
    """An experiment configuration failed validation."""


class MissingBaseline(HarnessError):
    """Relative curves requested without a repeated-sampling run."""
