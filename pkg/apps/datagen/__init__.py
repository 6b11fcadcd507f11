# Data generation app
