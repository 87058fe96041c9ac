"""Unit tests for geotomo."""
