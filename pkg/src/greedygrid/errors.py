"""Exception types shared across the package."""


class RegistrationError(ValueError):
    """Invalid input to a registration stage."""


class DegenerateGeometryError(RegistrationError):
    pass


class NoOverlapError(RegistrationError):
    pass


class ResourceBudgetError(RuntimeError):
    """A configuration would allocate more voxels than the configured cap.

    ``suggested_resolution`` holds a voxel resolution that fits the cap.
    """

    def __init__(self, message, suggested_resolution=None):
        super().__init__(message)
        self.suggested_resolution = suggested_resolution


class PointCloudFormatError(ValueError):
    """Malformed or unsupported point cloud file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
