"""Exception types raised across the package."""


class HolosurfError(Exception):
    """Base class for all package errors."""


class NonHermitianInput(HolosurfError, ValueError):
    """A matrix expected to be Hermitian failed the symmetry check."""


class NotUnitary(HolosurfError, ValueError):
    """A matrix expected to be unitary failed the unitarity check."""


class DimensionMismatch(HolosurfError, ValueError):
    """Operands have incompatible dimensions."""


class UnknownQubitLabel(HolosurfError, KeyError):
    """A qubit label is not part of the register."""


class DegenerateTheta(HolosurfError, ValueError):
    """The mixing angle sits on the excluded set theta = (1 + 2n) pi / 2."""


class AuxiliaryNotGround(HolosurfError, ValueError):
    """An auxiliary qubit expected in |0> carries excited amplitude."""


class OutOfRangeDelta(HolosurfError, ValueError):
    """An area error lies outside the domain of a closed-form expression."""


class NoCrossingInRange(HolosurfError, ValueError):
    """A fidelity curve does not cross the threshold inside the scanned range."""


class UnsupportedQubit(HolosurfError, ValueError):
    """A Pauli string has support outside the qubits a gate acts on."""


class NotClifford(HolosurfError, ValueError):
    """The requested gate is not in the supported Clifford set."""


class BadStepIndex(HolosurfError, IndexError):
    """An error event points outside the circuit."""


class DegenerateCoefficients(HolosurfError, ValueError):
    """Recovery angles are undefined for the given amplitudes."""


class InvalidDistance(HolosurfError, ValueError):
    """Surface-code distance below 2."""


class TooLargeForStateVector(HolosurfError, ValueError):
    """The register is too large for dense state-vector simulation."""


class InvalidConfig(HolosurfError, ValueError):
    """A run configuration failed validation."""
