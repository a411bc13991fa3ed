"""
src/__init__.py

Package initialization for l2a-ot: learning to augment novel domains with optimal transport.

No top-level functions or classes.
"""
