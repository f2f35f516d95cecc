class QuadReconError(Exception):
    """Base class for errors raised by quadrecon."""


class DegenerateFaceError(QuadReconError, ValueError):
    """A quad has a zero-length edge, a repeated vertex or a collinear corner."""


class MeshFormatError(QuadReconError, ValueError):
    """A mesh, cloud or bundle file could not be parsed."""


class TrainingError(QuadReconError, RuntimeError):
    """Training diverged or was given unusable samples."""
