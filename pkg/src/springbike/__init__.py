"""Design calculator and mission simulator for a spring-balanced autonomous bicycle."""

__version__ = "0.1.0"
