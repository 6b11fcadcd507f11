# Decentralized learning simulator project package
