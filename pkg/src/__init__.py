"""
Markov Chain Cutoff Toolkit
Mixing times, distance profiles and product-chain cutoff analysis
"""
