"""
View package for the cutoff toolkit
"""
from .console_view import ConsoleView

__all__ = ['ConsoleView']
