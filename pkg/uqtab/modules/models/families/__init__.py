# Classifier families
