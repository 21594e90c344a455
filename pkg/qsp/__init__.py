# qsp - quadratic stochastic processes: cubic matrices, families, verification, evolution
