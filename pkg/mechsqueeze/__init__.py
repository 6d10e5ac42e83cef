"""
Squeezing transfer from squeezed light to a laser-cooled mechanical oscillator.
"""

__version__ = "0.1.0"
