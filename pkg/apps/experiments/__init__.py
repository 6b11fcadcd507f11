# Experiment harness app
