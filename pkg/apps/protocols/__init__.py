# Training protocols app
