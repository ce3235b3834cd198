__version__ = "0.1.0"

from .get_phantom import get_phantom

supported_kinds = ["full", "cut", "closed", "open-surfaces"]
