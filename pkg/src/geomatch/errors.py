"""Exception hierarchy.

Every error raised by the library derives from :class:`GeomatchError` and
carries a short machine-readable ``code`` used by the command line front end
when it writes error records.
"""

from __future__ import annotations


class GeomatchError(Exception):
    """Base class for all library errors."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def record(self) -> dict:
        return {"error": self.code, "message": str(self), "details": _plain(self.details)}


class DomainError(GeomatchError):
    code = "domain"


class InjectivityError(GeomatchError):
    """Raised when a geodesic leaves the domain where exp/log are unique."""

    code = "injectivity"


class DegenerateEdgeError(GeomatchError):
    code = "degenerate-edge"


class ContractError(GeomatchError):
    code = "contract"


class SingularSystemError(GeomatchError):
    code = "singular-system"


class ShootingDivergenceError(GeomatchError):
    code = "shooting-divergence"


class MonotonicityError(GeomatchError):
    code = "monotonicity"


class CurveFileError(GeomatchError):
    code = "curve-file"


def _plain(obj):
    # make details JSON friendly
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)
