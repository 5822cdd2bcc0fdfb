"""Monte Carlo simulation of ghost imaging and ghost diffraction with thermal speckle."""
from .field_grid import ComplexField, ConfigurationError, GridSpec, IntensityFrame, SamplingError

__version__ = "0.1.0"

__all__ = ["ComplexField", "ConfigurationError", "GridSpec", "IntensityFrame", "SamplingError", "__version__"]
