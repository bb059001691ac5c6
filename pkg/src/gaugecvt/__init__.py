"""Rain-gauge placement from correlation-driven centroidal Voronoi tessellations."""
from .grid import Grid, ObservationMatrix, ScalarField

__version__ = "0.1.0"

__all__ = ["Grid", "ObservationMatrix", "ScalarField", "__version__"]
