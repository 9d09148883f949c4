"""Exception hierarchy shared by all roadsim modules."""


class RoadSimError(Exception):
    """Base class for every error raised by roadsim."""


class InvalidGeometryError(RoadSimError, ValueError):
    pass


class OutOfRangeError(RoadSimError, ValueError):
    pass


class DelayRangeError(OutOfRangeError):
    """A delay-line read falls outside the retained sample window."""


class InvalidParameterError(RoadSimError, ValueError):
    pass


class InvalidInputError(RoadSimError, ValueError):
    pass


class ConfigurationError(RoadSimError):
    """A scene or dataset cannot be realized with the requested settings."""


class WavFormatError(RoadSimError, ValueError):
    pass
