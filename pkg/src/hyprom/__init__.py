"""Reduced basis and empirical interpolation toolkit for parametrized 1D conservation laws."""
from __future__ import annotations

from .eim import EimSpace, complete_space, eim_greedy
from .grid import Grid, build_uniform_grid, cfl_number, stencil_of
from .hdm import TimeSchedule, Trajectory, apply_operator, evolve
from .models import Burgers, Euler, Parameter, ParameterDomain, make_model
from .online import OnlineOperator, ReducedSolution
from .pod import InnerProduct, ReducedBasis, pod

__version__ = "0.1.0"

__all__ = [
    "Burgers", "EimSpace", "Euler", "Grid", "InnerProduct", "OnlineOperator", "Parameter",
    "ParameterDomain", "ReducedBasis", "ReducedSolution", "TimeSchedule", "Trajectory",
    "apply_operator", "build_uniform_grid", "cfl_number", "complete_space", "eim_greedy",
    "evolve", "make_model", "pod", "stencil_of",
]
