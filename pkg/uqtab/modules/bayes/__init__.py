# Bayes module: BNN, priors, NUTS, posterior prediction, uncertainty
