"""Exception hierarchy shared by all rpclust modules."""


class RpclustError(ValueError):
    """Base class for data errors raised by rpclust."""


class EmptyInput(RpclustError):
    pass


class ZeroMarginal(RpclustError):
    pass


class DimensionTooLarge(RpclustError):
    pass


class BadK(RpclustError):
    pass


class NotBipartite(RpclustError):
    def __init__(self, offenders):
        self.offenders = tuple(offenders)
        shown = ", ".join(repr(o) for o in self.offenders[:10])
        super().__init__(f"labels appear on both sides of the pair list: {shown}")


class UncoveredNode(RpclustError):
    pass


class EmptyCommunity(RpclustError):
    pass


class MalformedRecord(RpclustError):
    def __init__(self, problems, line=None):
        self.problems = dict(problems)
        self.line = line
        detail = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"malformed record ({detail})")


class EmptyGazetteer(RpclustError):
    pass


class UnknownCity(RpclustError):
    def __init__(self, labels):
        self.labels = tuple(labels)
        super().__init__("cities missing from gazetteer: " + ", ".join(self.labels))


class TooFewRecords(RpclustError):
    pass


class DegenerateVariance(RpclustError):
    pass
