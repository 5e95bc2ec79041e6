# Fitting, testing and simulation services
