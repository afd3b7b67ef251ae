"""Modified conditional likelihood ratio (MCLR) test for instrumental-variable
regression with unknown error variance and many weak instruments."""

__version__ = "0.1.0"
