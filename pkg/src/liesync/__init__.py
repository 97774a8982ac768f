"""Synchronization of particle ensembles on matrix Lie groups."""
