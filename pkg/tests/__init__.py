"""
Test package for the cutoff toolkit
"""
