# nbfit test suite
