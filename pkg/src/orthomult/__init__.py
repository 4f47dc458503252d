"""Orthogonal multiplications of type [3,4,p]: construction, normal forms, moduli."""
