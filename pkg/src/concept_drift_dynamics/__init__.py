"""Concept Drift Dynamics - order-parameter ODEs, Monte Carlo and stability analysis of on-line learning under drift."""
