"""Exception hierarchy shared by all modules."""


class MflabError(Exception):
    """Base class; the CLI maps subclasses of this to exit code 3."""


class ConfigError(MflabError):
    pass


class NonPositiveMetric(MflabError):
    pass


class DegenerateTensor(MflabError):
    pass


class ChartExit(MflabError):
    pass


class StepFailure(MflabError):
    pass


class NoConvergence(MflabError):
    pass


class DegenerateSection(MflabError):
    pass


class MissingPrimitive(MflabError):
    pass


class FrameDegenerate(MflabError):
    pass


class UnsupportedChart(MflabError):
    pass


class HypothesisUnverified(MflabError):
    pass


class NotPeriodic(MflabError):
    pass


class NonConvexFiber(MflabError):
    pass


class NonStarShaped(MflabError):
    pass
