# Library package for group-sparse Bayesian multivariate regression
# Priors, likelihood, MCMC sampler, mixture approximation and design metrics
