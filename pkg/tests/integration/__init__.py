"""Integration tests for geotomo."""
