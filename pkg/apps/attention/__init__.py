# Attention aggregation app
