# Models module: classical classifier families, metrics, grid-search cross-validation
