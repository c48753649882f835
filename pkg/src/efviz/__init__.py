"""Simulator and verification harness for a 1-D viscoelastic blow-up model."""

from efviz.kernel import KernelAdmissibilityError, RelaxationKernel

__version__ = "0.1.0"

__all__ = ["RelaxationKernel", "KernelAdmissibilityError", "__version__"]
