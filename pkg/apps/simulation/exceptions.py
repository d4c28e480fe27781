class SimulationError(ValueError):
    pass
