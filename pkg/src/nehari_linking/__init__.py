"""Linking on the Nehari manifold for saturable exterior-domain problems."""
