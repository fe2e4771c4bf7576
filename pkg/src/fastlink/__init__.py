"""Importance-aware feature allocation for semantic transmission over fading links."""
