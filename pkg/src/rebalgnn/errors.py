"""Exception hierarchy.

Errors split into two families so the CLI can map them onto exit codes:
``InputError`` (bad files, bad arguments, exit 2) and ``ValidationError``
(well-formed input that violates a model or graph invariant, exit 3).
"""


class RebalError(Exception):
    exit_code = 1


class InputError(RebalError):
    exit_code = 2


class ValidationError(RebalError):
    exit_code = 3


class VerificationError(RebalError):
    exit_code = 4


# marketdata
class MissingColumn(InputError):
    def __init__(self, ticker):
        super().__init__(f"missing column for ticker {ticker!r}")
        self.ticker = ticker


class EmptyFile(InputError):
    pass


class UnparseableDate(InputError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: cannot parse date {value!r}")
        self.row = row


class DuplicateDate(InputError):
    pass


class AllMissingColumn(InputError):
    def __init__(self, ticker):
        super().__init__(f"column {ticker!r} has no observed values")
        self.ticker = ticker


class TooFewRows(InputError):
    pass


class EmptyFitRange(InputError):
    pass


class InsufficientHistory(InputError):
    pass


class TooFewSamples(InputError):
    pass


# costgraph
class TooFewAssets(InputError):
    pass


class DuplicateEdge(InputError):
    pass


class AsymmetricInput(InputError):
    pass


class MissingEdge(InputError):
    pass


class UnknownTicker(ValidationError):
    def __init__(self, ticker):
        super().__init__(f"unknown ticker {ticker!r}")
        self.ticker = ticker


class UnknownPathNode(ValidationError):
    pass


class InvalidGraph(ValidationError):
    pass


# gnn
class ShapeMismatch(ValidationError):
    pass


class TickerMismatch(ValidationError):
    pass


class EmptySplit(InputError):
    pass


class DivergedLoss(ValidationError):
    pass


class VersionMismatch(InputError):
    pass


class CorruptFile(InputError):
    pass


# pathfinder
class GraphTooLarge(InputError):
    pass


class NoPath(ValidationError):
    pass


# evaluation
class InvalidPosition(ValidationError):
    pass


class ZeroVariance(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class EmptyInput(InputError):
    pass


class IoFailure(InputError):
    pass
