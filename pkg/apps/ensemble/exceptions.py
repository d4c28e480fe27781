class EnsembleError(ValueError):
    pass
