"""Consistent round-based update scheduling with capacity augmentation."""
