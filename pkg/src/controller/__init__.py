"""
Controller package for the cutoff toolkit
"""
from .cli_controller import CliController, parse_and_dispatch, run_application

__all__ = ['CliController', 'parse_and_dispatch', 'run_application']
