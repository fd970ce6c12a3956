"""Figure rendering for networked-battle CSV/JSON artifacts."""

__version__ = "0.1.0"

from .recipes import FIGURES, FigureRecipe, SchemaError
from .render import build, render

__all__ = ["FIGURES", "FigureRecipe", "SchemaError", "build", "render", "__version__"]
