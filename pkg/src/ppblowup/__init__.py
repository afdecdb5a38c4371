"""Finite-element lab for blowup of a pseudo-parabolic equation with a singular potential.

Radial P1 discretization on the ball, discrete embedding constants, potential-well
classification, semi-implicit time marching to blowup, and checks of the solution
against explicit blowup-time and blowup-rate bounds.
"""
from .bounds import Tolerances, VerificationReport, compute_bounds, verify_trajectory
from .config import ExperimentConfig, load_config
from .constants import ConstantsReport, Regime, build_constants_report, estimate_embeddings
from .dynamics import Status, TimeStepConfig, Trajectory, run
from .fem import assemble_operators, build_mesh
from .model import ModelParams

__all__ = [
    "ConstantsReport", "ExperimentConfig", "ModelParams", "Regime", "Status", "TimeStepConfig",
    "Tolerances", "Trajectory", "VerificationReport", "assemble_operators", "build_constants_report",
    "build_mesh", "compute_bounds", "estimate_embeddings", "load_config", "run", "verify_trajectory",
]
