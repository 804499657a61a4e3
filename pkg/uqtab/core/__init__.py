# Core infrastructure: errors, seeds, artifacts, templates, stage manager
