"""Hybrid quantum-classical dynamics on a discretized phase space."""
