# Boruta module: all-relevant feature selection
