"""Numerical toolkit for the Landau-Lifshitz and Landau-Lifshitz-Gilbert equations in one dimension.

Modules:
    geometry         sphere-valued states and the maps between formulations
    frenet_profiles  self-similar expander and shrinker profiles
    solitons         easy-plane solitons, variational identities, coercivity
    evolution        LL / LLG / hydrodynamical / DNLS solvers and diagnostics
    regimes          Sine-Gordon, free wave and cubic NLS limits
    rough_data       dissipative semigroup, parabolic norms, jump data
    cli              command-line drivers
"""

__version__ = "0.1.0"
