"""elastoperiodic: time-periodic solutions of the damped nonlinear elastic wave system."""
