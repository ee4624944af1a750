"""Stochastic neural field simulation and verification on periodic grids."""

from .dynamics import (Affine, BoundedSmooth, ConstantDiffusion, ConstantGain, Ensemble, ModelSpec,
                       PicardDiagnostics, Scheme, Sigmoid, SmoothHeaviside, SolverConfig, Trajectory, picard_solve,
                       solve_ensemble, solve_hilbert_path, solve_path)
from .grid import Field, Grid, GridSpec, convolve, integrate, make_grid
from .kernels import Condition, KernelModel, Verdict, check_condition, solve_rho_fourier, solve_rho_power
from .noise import NoiseMode, NoiseSpec, Spectrum, matched_qwiener, qwiener, smoothed_white

__version__ = "0.1.0"
