"""Soft switching of DDPG expert policies for systems with uncertain parameters."""

__version__ = "0.1.0"
