# Network simulation app
