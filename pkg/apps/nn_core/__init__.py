# Neural network core app
