"""Continuous-aperture reflecting-surface simulator for near-field focusing and sensing."""
import os as _os

__version__ = "0.1.0"

# NFRIS_THREADS caps the BLAS pool; it must be set before numpy loads its backend.
_threads = _os.environ.get("NFRIS_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)
