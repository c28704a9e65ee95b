"""Test package for Poly-Oracle v1 skeleton."""
