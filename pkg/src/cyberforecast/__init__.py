"""Attack forecasting from unconventional signals."""
