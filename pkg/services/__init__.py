"""Pipeline stages, one package per stage."""
