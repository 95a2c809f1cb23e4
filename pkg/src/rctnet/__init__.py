"""Randomized controlled trial design and analysis under network interference."""
