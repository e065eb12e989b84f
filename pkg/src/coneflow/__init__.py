"""Numerics for surfaces with conical singularities.

Submodules: ``coords`` (cone charts and dyadic annuli), ``surface`` (sampled
cone metrics), ``holder`` (weighted Hölder norms), ``heat`` (linear parabolic
solver on truncated surfaces), ``flow`` (normalized Ricci flow in conformal
gauge), ``soliton`` (rotationally symmetric gradient solitons) and ``cli``.
"""

__version__ = "0.1.0"
