"""Closed-loop refinement of symbolic controllers and trace monitoring."""
