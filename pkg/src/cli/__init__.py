"""Command-line surface of wgspec."""
