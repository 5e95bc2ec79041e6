# HTTP surface for nbfit
