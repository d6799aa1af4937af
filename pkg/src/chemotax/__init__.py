""" Chemotaxis-consumption simulation and bilinear control toolkit """

__version__ = '0.1.0'
