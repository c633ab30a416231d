"""Curl-conforming finite elements and closed-form analytics for the
static relaxed micromorphic model and the dislocation gauge theory."""

from .constitutive import IsotropicParams

__all__ = ["IsotropicParams"]
__version__ = "0.1.0"
