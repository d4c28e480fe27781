class LearnerError(ValueError):
    pass
