"""Exception hierarchy.

Every error carries a short machine-readable ``code`` so the CLI can emit a
structured error object and pick an exit status.
"""


class ArtifactError(Exception):
    code = "artifact_error"
    #: CLI exit status for this family of errors
    exit_status = 3

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class ParseError(ArtifactError):
    code = "parse_error"
    exit_status = 2


class ValidationError(ArtifactError):
    code = "validation_error"
    exit_status = 2


class NumericalError(ArtifactError):
    code = "numerical_error"


# linear algebra
class NonSquare(ValidationError):
    code = "non_square"


class NumericalFailure(NumericalError):
    code = "numerical_failure"


class NotPSD(NumericalError):
    code = "not_psd"


class RankMismatch(NumericalError):
    code = "rank_mismatch"


class QuadratureNotConverged(NumericalError):
    code = "quadrature_not_converged"


class EvaluationFailure(NumericalError):
    code = "evaluation_failure"


# models
class SingularResolvent(NumericalError):
    code = "singular_resolvent"


class EndpointSingularity(NumericalError):
    code = "endpoint_singularity"


class ResonantCoupling(NumericalError):
    code = "resonant_coupling"


class NotRegularizing(NumericalError):
    code = "not_regularizing"


# resonance analysis
class InconsistentProbes(NumericalError):
    code = "inconsistent_probes"


class ContourTooClose(NumericalError):
    code = "contour_too_close"


class GroupingUnstable(NumericalError):
    code = "grouping_unstable"


class RealSplitPoint(NumericalError):
    code = "real_split_point"


# index and flow
class NotClassR(NumericalError):
    code = "not_class_r"


class EndpointResonant(NumericalError):
    code = "endpoint_resonant"


class EigenvalueAtLambda(NumericalError):
    code = "eigenvalue_at_lambda"


class GridTooCoarse(NumericalError):
    code = "grid_too_coarse"


# classification / embedded
class VectorNotInSpace(NumericalError):
    code = "vector_not_in_space"


class OrderMismatch(NumericalError):
    code = "order_mismatch"


class ConstructionFailed(NumericalError):
    code = "construction_failed"


class UnknownExample(ValidationError):
    code = "unknown_example"


#: errors that signal ill-conditioning of an instance rather than a bug
CONDITIONING_ERRORS = (
    GroupingUnstable,
    RealSplitPoint,
    RankMismatch,
    QuadratureNotConverged,
    ContourTooClose,
    InconsistentProbes,
    ResonantCoupling,
    SingularResolvent,
    NotClassR,
    EndpointResonant,
)
