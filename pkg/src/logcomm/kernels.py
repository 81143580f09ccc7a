"""Kernel backend selection, done once at import.

The compiled extension is used when built; setting ``LOGCOMM_PURE_PYTHON=1``
in the environment forces the numpy fallback.  Both backends are importable
directly (``logcomm._pykernels`` / ``logcomm._ckernels``) so they can be
benchmarked against each other in one process.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

HAVE_NATIVE = _ckernels is not None
_forced_python = os.environ.get("LOGCOMM_PURE_PYTHON", "").strip() not in ("", "0")
_impl = _pykernels if (_forced_python or not HAVE_NATIVE) else _ckernels

BACKEND = "python" if _impl is _pykernels else "native"


def csr_matvec(indptr, indices, data, x, row_ids=None):
    return _impl.csr_matvec(indptr, indices, data, x, row_ids)


def count_pair_keys(postings, starts, n):
    return _impl.count_pair_keys(postings, starts, n)
