"""Time-smoothed online gradient descent for streaming quantile forecasting."""
