"""
Tests Package

This package contains the test modules for the tensor engine, the network,
the objective, the data harness and the command services.
"""
