"""Property-based tests for geotomo."""
