"""
Model package for the cutoff toolkit
"""
from .distance_profile import DistanceKind, DistanceProfile
from .family import FamilyParams, HittingProfile
from .markov_chain import ChainSpec, ProbDist
from .uniformization import Uniformizer

__all__ = ['ChainSpec', 'ProbDist', 'DistanceKind', 'DistanceProfile', 'FamilyParams', 'HittingProfile',
           'Uniformizer']
