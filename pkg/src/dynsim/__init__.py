"""Dynamical similarity of time series.

Lifts trajectories into linear one-step operators (delay embedding plus
reduced-rank DMD with automatic rank selection) and measures dynamical
(dis)similarity by aligning the operators over the orthogonal group.
"""

from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"
__all__ = ["kernel_backend", "__version__"]
