"Isogeometric locally corrected Nystrom method for boundary integral equations"

from . import shapes  # noqa: F401
from .config import RunConfig, load_geometry
from .errors import IsoNystromError
from .geometry import Geometry, NurbsPatch

__version__ = "0.1.0"

__all__ = ["Geometry", "IsoNystromError", "NurbsPatch", "RunConfig", "load_geometry"]
