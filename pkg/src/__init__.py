"""Loop Soup Coupling - Main Package"""

__version__ = '1.0.0'
__author__ = 'Loop Soup Project'
__description__ = 'Coupling of random walk and Brownian loop soups with verification tools'
