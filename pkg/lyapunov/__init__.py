"""Quadratic incremental Lyapunov certificates and precision budgets."""
