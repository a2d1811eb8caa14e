"""Exception hierarchy for the simulator.

Every error carries a stable ``code`` string so scenario reports and CLI
diagnostics can refer to failures without parsing messages.
"""


class SimulatorError(Exception):
    code = "E_GENERIC"

    def __str__(self) -> str:
        base = super().__str__()
        return f"{self.code}: {base}" if base else self.code


class BadNodeError(SimulatorError):
    code = "E_BAD_NODE"


class NoSuchProcessError(SimulatorError):
    code = "E_NO_SUCH_PROCESS"


class MessageTooLargeError(SimulatorError):
    code = "E_MSG_TOO_LARGE"


class AddressInUseError(SimulatorError):
    code = "E_ADDR_IN_USE"


class BadStateError(SimulatorError):
    code = "E_BAD_STATE"


class ConnRefusedError(SimulatorError):
    code = "E_CONN_REFUSED"


class WouldBlockError(SimulatorError):
    code = "E_WOULD_BLOCK"


class TimeTravelError(SimulatorError):
    code = "E_TIME_TRAVEL"


class InvalidScenarioError(SimulatorError):
    code = "E_INVALID_SCENARIO"


class NoSolutionError(SimulatorError):
    code = "E_NO_SOLUTION"
