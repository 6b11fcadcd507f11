# Topology app
