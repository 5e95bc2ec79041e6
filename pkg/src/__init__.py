# nbfit - Negative Binomial Profile Fitting
