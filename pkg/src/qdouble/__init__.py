"""Kitaev quantum double D(G) simulator."""
