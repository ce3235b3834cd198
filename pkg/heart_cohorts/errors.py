class HeartCohortsError(Exception):
    """
    Base class of every error raised by the pipeline.
    Errors that come with diagnostics keep them in `report`.
    """
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report if report is not None else {}


# geometry
class MeshError(HeartCohortsError):
    pass

class ParseError(MeshError):
    def __init__(self, message, path=None, offset=None, line=None):
        where = []
        if path is not None:
            where.append(f"file={path}")
        if line is not None:
            where.append(f"line={line}")
        if offset is not None:
            where.append(f"byte_offset={offset}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message, report={"path": path, "line": line, "offset": offset})
        self.line = line
        self.offset = offset

class UnsupportedElement(MeshError):
    pass

class DegenerateInput(MeshError):
    pass

class NotClosed(MeshError):
    pass

class NonManifoldEdge(MeshError):
    def __init__(self, edges):
        edges = [tuple(int(v) for v in e) for e in edges]
        super().__init__(f"{len(edges)} edge(s) with more than two incident faces, first {edges[:5]}",
                         report={"edges": edges})
        self.edges = edges


# rays
class RayError(HeartCohortsError):
    pass

class GrazingRayError(RayError):
    pass


# labelling
class LabellingError(HeartCohortsError):
    pass

class NotBiventricular(LabellingError):
    pass

class ValveCountMismatch(LabellingError):
    pass

class SeptumNotFound(LabellingError):
    pass

class ClusterSeparationFailed(LabellingError):
    pass

class BasalPlaneNotFound(LabellingError):
    pass

class MeshesDisjoint(LabellingError):
    pass


# mesh building
class MeshBuildError(HeartCohortsError):
    pass

class SelfIntersectingOffset(MeshBuildError):
    pass

class StitchFailed(MeshBuildError):
    pass

class EmptyResult(MeshBuildError):
    pass


# fields
class FieldError(HeartCohortsError):
    pass

class SolverDiverged(FieldError):
    pass

class MaximumPrincipleViolated(FieldError):
    pass

class EmptyBoundary(FieldError):
    pass

class MissingLabel(FieldError):
    pass

class DegenerateDirection(FieldError):
    pass

class PlaneBelowApex(FieldError):
    pass

class MissingField(FieldError):
    pass

class MissingCoordinates(FieldError):
    pass


# fibres
class FibreError(HeartCohortsError):
    pass

class UnresolvableDegenerate(FibreError):
    pass


# bundle
class BundleError(HeartCohortsError):
    pass

class EmptySource(BundleError):
    pass

class InvalidRange(BundleError):
    pass

class WriteFailed(BundleError):
    pass

class MissingArtifact(BundleError):
    pass

class ChecksumMismatch(BundleError):
    def __init__(self, files):
        files = sorted(files)
        super().__init__(f"checksum verification failed for: {', '.join(files)}", report={"files": files})
        self.files = files


# phantoms / config
class PhantomError(HeartCohortsError):
    pass

class InvalidParams(PhantomError):
    pass

class ConfigError(HeartCohortsError):
    pass
