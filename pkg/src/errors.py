"""Exception types raised by the auditor.

All domain errors derive from ValueError so callers that only care about
"bad input" can keep catching the builtin.
"""


class EncodingError(ValueError):
    """A record does not fit the schema it is encoded under."""


class SchemaError(ValueError):
    """A schema, dataset or model structure is malformed."""


class DegeneratePairError(ValueError):
    """Both worlds of a neighboring pair would be identical."""


class IncompatibleAttackError(ValueError):
    """The attack's threat model does not apply to the mechanism."""


class BugNotApplicableError(ValueError):
    """A planted violation was requested for a mechanism it cannot affect."""


class BudgetUnsatisfiableError(ValueError):
    """The privacy budget cannot be met with the requested hyper-parameters."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
