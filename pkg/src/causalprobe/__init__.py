"""Gradient-based causal discovery with active intervention targeting."""
