"""Exact simulation and closed-form analytics for ephemerally self-exciting processes.

Submodules: ``core`` (parameters, paths, RNG streams), ``simulators``,
``analytics``, ``branching``, ``limits``, ``blocking``, ``numerics``,
``verify`` and ``cli``.
"""

from .core import ESEP, ESEP_B, HAWKES, HESEP, NGESEP, SIS, ModelParams, RngStreamSpec, SamplePath
from .laws import KernelSpec, Law

__version__ = "0.1.0"

__all__ = ["ESEP", "ESEP_B", "HAWKES", "HESEP", "NGESEP", "SIS", "KernelSpec", "Law", "ModelParams",
           "RngStreamSpec", "SamplePath", "__version__"]
