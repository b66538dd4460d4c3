"""Exception hierarchy shared across the package.

Every error raised deliberately by this library derives from
:class:`SiovError`, so callers can catch one base class at the boundary
(the CLI maps subclasses onto distinct exit codes).
"""


class SiovError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SiovError):
    """A numeric argument lies outside its legal domain (mass <= 0, ...)."""


class RuleValidationError(SiovError):
    """A rule base violates its structural invariants."""


class VersionError(SiovError):
    """A rule-base update does not advance the version monotonically."""


class TopologyError(SiovError):
    """A command hierarchy contains a cycle (a node subordinate to itself)."""


class MembershipError(SiovError):
    """An illegal platoon membership change was requested."""


class AddressingError(SiovError):
    """A message names an unknown sender or recipient."""


class RoutingError(SiovError):
    """A right-of-way path references unknown road segments or signals."""


class ConfigurationError(SiovError):
    """A configuration value is structurally invalid."""


class ScenarioValidationError(SiovError):
    """A scenario or network document failed validation.

    ``problems`` carries one human-readable diagnostic per issue found.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ScenarioSyntaxError(ScenarioValidationError):
    """The document is not even well-formed text; carries line/column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"syntax error{where}: {message}")


class IntegrityError(SiovError):
    """An audit log failed hash-chain verification or an append was illegal."""
