"""Numerical experiments on Dirichlet energies of Q-valued maps.

Modules: ``qspace`` (unordered Q-tuples and their metric), ``fracsob``
(fractional Sobolev seminorms), ``harmonics`` (annulus and half-disk
harmonic extensions), ``domains`` (graph domains, bilipschitz maps and
meshes), ``minimizer`` (discrete Dirichlet minimizers) and ``expcli``
(experiment recipes and the ``qdl`` command).
"""

__version__ = "0.1.0"
