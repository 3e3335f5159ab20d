"""Unit tests for individual functions and classes."""
