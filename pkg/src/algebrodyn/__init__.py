"""Biquaternionic algebrodynamics: twistor generating functions, Kerr branches, fields, singular loci."""
