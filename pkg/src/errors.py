"""Domain errors raised by the search-contract solvers."""


class SearchError(ValueError):
    """Base class for every domain error; the CLI maps it to exit code 3."""


class CostOutOfRange(SearchError):
    """Search cost outside [0, 1/2] under the uniform distribution."""


class DomainError(SearchError):
    """Prices outside the nondegenerate region max(p) <= A, |p1 - p2| <= 1 - A."""


class NoInteriorMaximum(SearchError):
    """The deviation first-order condition has no real root."""


class DegenerateBonus(SearchError):
    """The rank bonus vanishes (s = 0), so the search-order bounds are 0/0."""


class NoRoot(SearchError):
    """H(p, p) never changes sign: the implementable set is empty or degenerate."""


class Infeasible(SearchError):
    """No search order satisfies both incentive constraints."""


class NoBracket(SearchError):
    """A bisection bracket does not contain a sign change."""


class WrongRegime(SearchError):
    """Both prices are below the threshold; use the plain implementable set."""


class UnsupportedDistribution(SearchError):
    """The operation has closed forms for the uniform distribution only."""
