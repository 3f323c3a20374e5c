"""
Main application entry point for the Markov chain cutoff toolkit
"""
import sys
import os

# Make the repository root importable when run from elsewhere
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.controller import run_application


if __name__ == '__main__':
    # Run the application
    exit_code = run_application(sys.argv[1:])
    sys.exit(exit_code)
