# Resample module: SMOTE oversampling
