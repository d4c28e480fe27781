class MetricsError(ValueError):
    pass
