# Pipeline module: end-to-end run and consolidated report
