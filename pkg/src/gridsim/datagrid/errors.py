class GridError(Exception):
    """Base class for data-grid failures."""


class ConfigurationError(GridError):
    pass


class JoinError(GridError):
    pass


class NoSuchMemberError(GridError):
    pass


class DataUnavailableError(GridError):
    """The owner of a partition is gone and no replica survived."""


class MemberLeftError(GridError):
    """A task's target member departed before the task completed."""


class UnknownTaskError(GridError):
    pass
