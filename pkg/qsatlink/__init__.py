"""
QSatLink - PDT and finite-key BB-84 rates for satellite optical links
"""

__version__ = "1.0.0"
__author__ = "liamsdat"
