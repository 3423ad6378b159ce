# Uncertainty-weighted decoding package
