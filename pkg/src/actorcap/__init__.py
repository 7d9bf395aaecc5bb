"""Actor language toolkit: protocol-carrying actor references.

Actor references carry a formal language over message types restricting the
sequences of messages that may be sent through them.  The package provides
the language algebra, a checker that threads reference protocols through the
program flow-sensitively, a deterministic actor runtime, and a dynamic
monitor validating the protocol discipline on concrete executions.
"""

__version__ = "0.1.0"
