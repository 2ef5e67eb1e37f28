"""Independent reference solvers used to cross-check the closed-form results."""
