"""Terminal display and live progress for the skewfit CLI."""
