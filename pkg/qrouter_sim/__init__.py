"""
Quantum router network simulator
"""

__version__ = "0.1.0"
