"""Exception types shared across the package."""


class CdqError(Exception):
    """Base class for every refusal raised by this package."""

    kind = "error"

    def to_json(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class CapacityError(CdqError):
    """Input lies outside the supported desk-scale envelope."""

    kind = "capacity"

    def __init__(self, message: str, estimate: int | None = None):
        super().__init__(message)
        self.estimate = estimate

    def to_json(self) -> dict:
        out = super().to_json()
        if self.estimate is not None:
            out["estimate"] = self.estimate
        return out


class ValidationError(CdqError, ValueError):
    kind = "validation"


class RadicalError(ValidationError):
    """The form has a nonzero radical, so Z(G) is larger than W."""

    kind = "radical"


class FamilyError(ValidationError):
    kind = "family"


class ClassificationError(CdqError):
    kind = "classification"


class StructureError(CdqError):
    """Input is not of the shape the structural analysis handles."""

    kind = "structure"


class Violation(CdqError):
    """A computed invariant contradicts the structure theorem for quasiantichains."""

    kind = "violation"

    def __init__(self, step: str, message: str):
        super().__init__(f"{step}: {message}")
        self.step = step

    def to_json(self) -> dict:
        return dict(super().to_json(), step=self.step)
