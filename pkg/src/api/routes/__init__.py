# Fit and goodness-of-fit routes
