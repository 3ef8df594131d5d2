"""Exception hierarchy shared by all modules."""


class LdpCdoError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameter(LdpCdoError, ValueError):
    pass


class AssumptionViolated(LdpCdoError, ValueError):
    """An investment-grade or density assumption does not hold."""


class DegenerateCurve(LdpCdoError, ValueError):
    pass


class NoRoot(LdpCdoError, ArithmeticError):
    pass


class UndefinedSpread(LdpCdoError, ArithmeticError):
    pass


class CombinatorialBlowup(LdpCdoError, ValueError):
    pass


class NonUniqueMinimizer(LdpCdoError, ValueError):
    pass


def ig_violation(alpha: float, f_t_minus: float, where: str = "") -> AssumptionViolated:
    suffix = f" ({where})" if where else ""
    return AssumptionViolated(
        f"investment-grade assumption requires α>F(T−); got α={alpha!r}, "
        f"F(T−)={f_t_minus!r}{suffix}"
    )
