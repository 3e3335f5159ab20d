"""Shared infrastructure for the PathOCL pipeline stages."""
