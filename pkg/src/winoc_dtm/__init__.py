"""Wireless NoC thermal management: RC thermal model, temperature predictor, routing and DTM."""
__version__ = "0.1.0"
