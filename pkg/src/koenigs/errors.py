"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class KoenigsError(Exception):
    code = "error"


class DomainError(KoenigsError, ValueError):
    """Input outside the domain of an operation (pole, branch cut, |z| >= 1)."""

    code = "domain"


class NumericOverflow(KoenigsError, ArithmeticError):
    code = "overflow"


class InstabilityError(KoenigsError):
    """An orbit numerically left the closed unit disc."""

    code = "instability"


class ParseError(KoenigsError, ValueError):
    """Malformed map expression; ``offset`` is a byte offset into the source."""

    code = "parse"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.message = message
        self.offset = offset


class CorpusError(KoenigsError, ValueError):
    code = "corpus"


class AmbiguityError(KoenigsError):
    code = "ambiguous"


class InconclusiveError(KoenigsError):
    code = "inconclusive"


class PreconditionError(KoenigsError):
    code = "precondition"


class DegenerateError(KoenigsError):
    code = "degenerate"
