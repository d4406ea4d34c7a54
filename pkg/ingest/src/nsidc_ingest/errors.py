"""Error taxonomy; exit codes follow the floecast CLI convention."""


class IngestError(Exception):
    """Base class for all converter errors."""


class UsageError(IngestError):
    """Bad invocation: unknown variable, missing arguments. Exit code 1."""


class SourceDataError(IngestError):
    """Unusable source data: unknown flags, bad shapes, gaps, inconsistent
    masks, unreadable or duplicated files. Exit code 2."""


EXIT_USAGE = 1
EXIT_DATA = 2
