# Shared models and templates
