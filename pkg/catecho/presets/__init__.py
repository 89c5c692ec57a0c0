"""Bundled experiment presets."""
