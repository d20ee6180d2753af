"""Lexicons and caption templates shipped with the package."""
