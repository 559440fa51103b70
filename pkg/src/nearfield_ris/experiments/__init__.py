"""Config-driven command line runs."""
