"""Problem configuration and the command pipeline."""
