# Data module: schema, CSV ingestion, encoding, scaling, splitting, descriptive statistics
