"""Exception types shared across the toolkit.

Every error that callers are expected to branch on gets its own class;
parsing problems that should not abort a batch are reported as diagnostics
on the result objects instead.
"""


class KevTriageError(Exception):
    """Base class for all toolkit errors."""


# --- catalog ingestion ---

class MalformedFeedError(KevTriageError):
    """The KEV feed document could not be read at all."""


class UnknownVersionPrefixError(KevTriageError):
    """A CVSS vector string does not start with a supported version prefix."""


class MissingMandatoryMetricError(KevTriageError):
    """A CVSS vector is missing one of the modeled base metrics."""

    def __init__(self, metric: str):
        super().__init__(f"missing mandatory CVSS metric: {metric}")
        self.metric = metric


# --- advisory ingestion ---

class SchemaViolationError(KevTriageError):
    """A structured advisory or playbook document breaks its schema."""

    def __init__(self, path: str, message: str = ""):
        detail = f"schema violation at {path}" + (f": {message}" if message else "")
        super().__init__(detail)
        self.path = path


class UnresolvedProductReferenceError(KevTriageError):
    """A remediation references a product_id absent from the product tree."""

    def __init__(self, product_id: str):
        super().__init__(f"remediation references unknown product_id: {product_id}")
        self.product_id = product_id


class UnsupportedRemediationTypeError(KevTriageError):
    """A legacy remediation type has no mapping onto the five categories."""

    def __init__(self, type_text: str):
        super().__init__(f"unsupported remediation type: {type_text!r}")
        self.type_text = type_text


# --- classification ---

class EmptyInputError(KevTriageError):
    """An aggregate operation was handed an empty collection."""


class EndpointUnavailableError(KevTriageError):
    """The external classifier endpoint could not be reached."""


class InvalidCodeReturnedError(KevTriageError):
    """The external classifier returned a malformed commodity code."""

    def __init__(self, code: str):
        super().__init__(f"external classifier returned invalid code: {code!r}")
        self.code = code


class ResponseParseFailureError(KevTriageError):
    """The external classifier response could not be parsed."""


# --- reliability ---

class NoOverlapError(KevTriageError):
    """Two raters share no commonly rated items for an attribute."""


class DegeneratePeError(KevTriageError):
    """Chance agreement reached 1; the coefficient is undefined."""


# --- attack mapping ---

class MalformedBundleError(KevTriageError):
    """The technique/mitigation dataset bundle could not be read."""


class EmptyDomainError(KevTriageError):
    """The dataset bundle contains no usable techniques or mitigations."""


class UnknownTechniqueError(KevTriageError):
    """A mapping references a technique id absent from the loaded dataset."""

    def __init__(self, technique_id: str):
        super().__init__(f"technique not in loaded dataset: {technique_id}")
        self.technique_id = technique_id


# --- playbook ---

class WeightSumViolationError(KevTriageError):
    """Change-risk weights do not sum to 1."""


class NothingActionableError(KevTriageError):
    """No vendor remediation and no derived candidates exist for an entry."""

    def __init__(self, cve_id: str, reason: str):
        super().__init__(f"{cve_id}: {reason}")
        self.cve_id = cve_id
        self.reason = reason


# --- service ---

class WorkspaceLockedError(KevTriageError):
    """Another process holds the workspace lock."""


class StageError(KevTriageError):
    """A pipeline command ran before its prerequisite stage."""

    def __init__(self, missing_stage: str, hint: str = ""):
        message = f"missing pipeline stage: {missing_stage}"
        if hint:
            message += f" ({hint})"
        super().__init__(message)
        self.missing_stage = missing_stage


class StaleVersionError(KevTriageError):
    """A write carried a workspace version that is no longer current."""

    def __init__(self, expected: str, actual: str):
        super().__init__(
            f"workspace version mismatch: write based on {expected}, current is {actual}"
        )
        self.expected = expected
        self.actual = actual
