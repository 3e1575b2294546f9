"""Exception types shared across the package."""


class Rank2Error(ValueError):
    """Base class for every domain error raised by rank2ops."""


# elliptic
class DegenerateLattice(Rank2Error):
    pass


class PoleAtLatticePoint(Rank2Error):
    pass


# diffop
class WindowTooSmall(Rank2Error):
    pass


class WindowMismatch(Rank2Error):
    pass


class NotSquareBands(Rank2Error):
    pass


# construction
class AlphaCollision(Rank2Error):
    pass


class DegenerateGamma(Rank2Error):
    pass


class DenominatorCollision(Rank2Error):
    pass


class IndexOutOfData(Rank2Error):
    pass


class NoPartner(Rank2Error):
    pass


class IllConditionedFit(Rank2Error):
    pass


# baker
class NonGenericData(Rank2Error):
    pass


class RankDeficientFit(Rank2Error):
    pass


class SingularPsiHat(Rank2Error):
    pass


class InsufficientJetOrder(Rank2Error):
    pass


class ZeroCountMismatch(Rank2Error):
    pass


# flows
class RequiresPeriodic(Rank2Error):
    pass


class ZeroLeadingA(Rank2Error):
    pass


# cli
class ConfigError(Rank2Error):
    pass
