class BenchError(ValueError):
    pass
