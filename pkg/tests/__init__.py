"""Tests for geotomo."""
