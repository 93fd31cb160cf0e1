"""Exception hierarchy shared across the package.

Everything raised on bad data or bad configuration derives from
:class:`ClicktreeError`, which the CLI maps to exit code 2.
"""


class ClicktreeError(Exception):
    """Base class for all data / configuration errors."""


class MissingFile(ClicktreeError):
    pass


class SchemaMismatch(ClicktreeError):
    pass


class DanglingReference(ClicktreeError):
    pass


class DuplicateRow(ClicktreeError):
    pass


class ConfigInvalid(ClicktreeError):
    pass


class IoError(ClicktreeError):
    pass


class UnknownAssignment(ClicktreeError):
    pass


class UnknownStudent(ClicktreeError):
    pass


class InsufficientEmbeddings(ClicktreeError):
    pass


class DimensionMismatch(ClicktreeError):
    pass


class LengthMismatch(ClicktreeError):
    pass


class SingleClass(ClicktreeError):
    pass


class ColumnMismatch(ClicktreeError):
    pass


class VersionMismatch(ClicktreeError):
    pass


class CorruptModel(ClicktreeError):
    pass


class UnresolvableStudent(ClicktreeError):
    pass


class NoLabels(ClicktreeError):
    pass


class DegenerateSample(ClicktreeError):
    pass
