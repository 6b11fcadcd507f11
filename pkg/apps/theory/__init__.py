# Convergence theory diagnostics app
