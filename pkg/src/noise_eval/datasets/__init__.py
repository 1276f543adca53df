"""Bundled copies of three UCI datasets used by the reproduction tests."""
