"""Attention heads with role masks, sequence encoders, evaluation metrics and
phrase compositionality scoring."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
