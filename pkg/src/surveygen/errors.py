"""Exception hierarchy shared across the package."""


class SurveygenError(Exception):
    """Base class for all package errors."""


# --- provider gateway ---

class ProviderUnavailable(SurveygenError):
    """Provider kept failing after the retry budget was exhausted."""


class ContextOverflow(SurveygenError):
    """Provider rejected the input length; caller must truncate and retry."""


class EmptyInput(SurveygenError):
    """Embedding request contained no usable text."""


# --- reference search ---

class ExtractionFormatError(SurveygenError):
    """Query-term extraction stayed malformed after the format re-prompt."""


class ArxivUnavailable(SurveygenError):
    """The arXiv API could not be reached or returned an error."""


# --- ingestion ---

class ParserCommandFailed(SurveygenError):
    """External document parser exited non-zero."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class UnsupportedFormat(SurveygenError):
    """Uploaded file is neither PDF nor Markdown."""


class UploadTooLarge(SurveygenError):
    """Uploaded file exceeds the configured size limit."""


class EmptyDocument(SurveygenError):
    """Document has no content to chunk or cite."""


class EmptyScope(SurveygenError):
    """Retrieval scope contains no indexed chunks."""


# --- categorization ---

class TooFewReferences(SurveygenError):
    """Clustering needs at least two descriptions."""


class NamingFormatError(SurveygenError):
    """Cluster naming stayed malformed after the re-prompt."""


class UnknownReference(SurveygenError):
    """Reference id not present in the cluster model."""


class InvalidCluster(SurveygenError):
    """Target cluster index out of range."""


# --- outline ---

class OutlineSyntaxError(SurveygenError):
    """Outline text violates the heading grammar."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class InvariantViolation(SurveygenError):
    """Edit or artifact would violate a structural invariant."""


class FillFormatError(SurveygenError):
    """Outline slot fill stayed malformed after the re-prompt."""


# --- composer ---

class EmptyScores(SurveygenError):
    """Adaptive threshold needs at least one similarity score."""


# --- exporter ---

class DanglingCitation(SurveygenError):
    """A citation key has no matching reference entry."""


class LayoutCommandFailed(SurveygenError):
    """Graph layout command failed; DOT text is still available."""


class LatexToolchainFailed(SurveygenError):
    """External LaTeX toolchain failed; log captured."""

    def __init__(self, message: str, log: str = ""):
        super().__init__(message)
        self.log = log


# --- judge ---

class ScoreParseError(SurveygenError):
    """Judge response was not a lone integer 1-5 even after the re-prompt."""


# --- orchestrator ---

class UnknownSession(SurveygenError):
    """Session id not found in the storage root."""


class UnknownJob(SurveygenError):
    """Job id not known to the runner."""


class UnknownSection(SurveygenError):
    """Section index does not exist in the composed draft."""


class InvalidTransition(SurveygenError):
    """Requested stage does not follow from the session's current state."""


class JobAlreadyRunning(SurveygenError):
    """The session already has an active background job."""


class StaleVersion(SurveygenError):
    """Optimistic version check failed; reload and retry."""


class StorageUnavailable(SurveygenError):
    """Session storage root could not be created or written."""
