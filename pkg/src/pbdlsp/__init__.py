"""Polynomial birth-death approximation of superposed i.i.d. point processes on [0, 1]."""

__version__ = "0.1.0"

from .carrier import INTERVAL, CarrierSpace, Configuration, Partition, assemble, dyadic_partition, metric_d0
from .distances import (
    CountVectorLaw,
    EmpiricalLaw,
    count_law,
    d1,
    d2_empirical,
    epsilon_n,
    theta_eps,
    tv,
    tv_partition,
    u_m,
)
from .moments import FactorialMoments, IntensitySpec, classify_case, factorial_moments, intensity
from .pbd import PbdParams, PbdPmf, bd_chain_validate, pbd_pmf, pbd_process_sample, select_params
from .processes import (
    Bernoulli,
    BernoulliShift,
    CompoundPoisson,
    Exponential,
    MarkovEntrance,
    Renewal,
    RngSeed,
    TwoPointMixture,
    Uniform,
    sample_one,
    sample_superposition,
)
from .spatial import SpatialMeasure
