# Explain module: exact Shapley attribution and SHAP charts
