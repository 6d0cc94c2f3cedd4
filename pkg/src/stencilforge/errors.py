"""Exception hierarchy shared by every stage of the pipeline."""


class StencilForgeError(Exception):
    """Base class for all errors raised by stencilforge."""


class NonLinearTarget(StencilForgeError):
    pass


class TargetAbsent(StencilForgeError):
    pass


class SingularSystem(StencilForgeError):
    pass


class HaloExceeded(StencilForgeError):
    pass


class NotTimeVarying(StencilForgeError):
    pass


class OutOfDomain(StencilForgeError):
    pass


class UnboundSpacing(StencilForgeError):
    pass


class ScheduleError(StencilForgeError):
    """The expressions cannot be lowered to a race-free loop nest."""


class StackOverflowBound(StencilForgeError):
    pass


class MissingBinding(StencilForgeError):
    def __init__(self, name):
        super().__init__(f"no data bound for symbol {name!r}")
        self.name = name


class ShapeMismatch(StencilForgeError):
    pass


class BoundsViolation(StencilForgeError):
    """Raised by the instrumented interpreter on an out-of-range access."""


class CflViolation(StencilForgeError):
    pass


class NonConvergence(StencilForgeError):
    pass


class UnknownDemo(StencilForgeError):
    pass
