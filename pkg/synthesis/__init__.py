"""Safety controller synthesis on symbolic models."""
