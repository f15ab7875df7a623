"""Binary intrusion detection on the fused UNSW-NB15 and KDD Cup 1999 feature spaces."""

from ._accel import backend_name
from .errors import ConfigError, DataError, PreconditionError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "PreconditionError", "backend_name", "__version__"]
