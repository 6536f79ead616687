"""Hot numerical kernels with an optional compiled implementation.

At import time the Cython extension ``_kernels`` is preferred; when it is
absent (pure-Python install) or when ``FRACTRANS_FORCE_FALLBACK`` is set,
the numpy implementations in ``_fallback`` are used instead.  Both
implementations are kept result-identical up to floating-point
associativity; see benchmarks/bench_core.py for the speed comparison.
"""

import os

from . import _fallback

BACKEND = "fallback"

if not os.environ.get("FRACTRANS_FORCE_FALLBACK"):
    try:
        from . import _kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _kernels = None
else:
    _kernels = None

_impl = _kernels if BACKEND == "compiled" else _fallback

caputo_l1_apply = _impl.caputo_l1_apply
pairwise_repulsion_sum = _impl.pairwise_repulsion_sum

__all__ = ["BACKEND", "caputo_l1_apply", "pairwise_repulsion_sum"]
