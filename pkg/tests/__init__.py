"""Tests for portfolio optimisation package."""
