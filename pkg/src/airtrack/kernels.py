"""Kernel backend selection: compiled extension when available, NumPy otherwise.

Set ``AIRTRACK_PURE_PYTHON=1`` to force the fallback (used by the parity
tests and the benchmark). ``BACKEND`` names whichever implementation is
active.
"""

from __future__ import annotations

import os

if os.environ.get("AIRTRACK_PURE_PYTHON", "") == "1":
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]
        BACKEND = "python"

arma_css_residuals = _impl.arma_css_residuals
lstm_forward = _impl.lstm_forward
lstm_loss_grads = _impl.lstm_loss_grads
