"""Caging verification and quasi-static pull-out simulation for shell-type soft jigs."""

__version__ = "0.1.0"
