"""Experiment harness: datasets, configuration, scheme wiring and output."""
