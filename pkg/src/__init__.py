"""Implementable search-order contracts for platform-designed consumer search."""
