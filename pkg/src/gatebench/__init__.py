"""Single-qubit gate benchmarking: DRB, gate set tomography, gauge fixing and calibration."""
from gatebench.noise import NoiseParams

__version__ = "0.1.0"

__all__ = ["NoiseParams", "__version__"]
