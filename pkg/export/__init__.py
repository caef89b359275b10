"""CSV, DOT and JSON writers for models, controllers and traces."""
