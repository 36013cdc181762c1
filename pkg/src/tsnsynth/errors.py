class ModelError(Exception):
    """Raised when a system model is structurally unusable."""


class InfeasibleError(Exception):
    """Raised when a synthesis stage proves there is no solution.

    `stage` names the pipeline stage ("routing", "p_int", "schedule") and
    `subjects` the offending streams/applications.
    """

    def __init__(self, stage: str, message: str, subjects: tuple[str, ...] = ()):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.subjects = tuple(subjects)
