"""Bound calculators, trace audits and heavy-traffic experiments."""
