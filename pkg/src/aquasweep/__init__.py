"""Adaptive plane-sweep view synthesis and depth fitting."""
