"""Per-ball certification of the Jacobian property and ball correspondences.

A univariate map F has the Jacobian property on a ball B when it bijects
B onto another ball, ord(F') is constant and finite on B, and

    ord(F(x) - F(y)) = ord(F') + ord(x - y)   for all x != y in B,

i.e. F is an exact isometry up to the scale p^(-ord F').  Certification
here is exhaustive over the depth-M representatives of B, not symbolic:
certificates carry the depth at which they were verified, and a deeper
violation could in principle exist for non-polynomial builtins.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .qp_core import PadicScalar
from .regions import Ball, BallRelation, Window
from .cells import Cell, NoCandidateFits, enumerate_balls, fit_cell
from .terms import EvaluationError, Term, differentiate, evaluate, free_variables

__all__ = [
    "ViolationKind",
    "JacobianCertificate",
    "JacobianViolation",
    "NotABall",
    "BallCorrespondence",
    "CorrespondenceFailure",
    "Tag",
    "BallClassification",
    "CertificationFailed",
    "CertificateCheck",
    "check_jacobian_on_ball",
    "map_ball",
    "check_ball_correspondence",
    "classify_forward_or_inverse_lipschitz",
    "verify_certificate",
]


class ViolationKind(enum.Enum):
    C_JAC_ORD_VARIES = "c_jac_ord_varies"
    A_NOT_INJECTIVE = "a_not_injective"
    A_IMAGE_NOT_BALL = "a_image_not_ball"
    D_DISTANCE_MISMATCH = "d_distance_mismatch"


@dataclass(frozen=True)
class JacobianCertificate:
    """Evidence that f has the Jacobian property on a ball, checked at a depth.

    The image radius is forced: radius_ord(image) = jac_ord + radius_ord(ball).
    """

    ball: Ball
    image: Ball
    jac_ord: int
    verified_depth: int

    def as_json_dict(self) -> dict:
        return {
            "ball": {"center": str(self.ball.center), "radius_ord": self.ball.radius_ord},
            "image": {"center": str(self.image.center), "radius_ord": self.image.radius_ord},
            "jac_ord": self.jac_ord,
            "depth": self.verified_depth,
        }


@dataclass(frozen=True)
class JacobianViolation:
    """A concrete counterexample to one of the certification conditions.

    The witness points re-check to the violation by direct evaluation.
    """

    failed_condition: ViolationKind
    witness: tuple  # one or two PadicScalar points
    detail: str

    def as_json_dict(self) -> dict:
        return {
            "violation": self.failed_condition.value,
            "witness": [str(w) for w in self.witness],
            "detail": self.detail,
        }


@dataclass(frozen=True)
class NotABall:
    """Image representatives do not tile a single ball; witnesses span the gap."""

    witnesses: tuple
    detail: str


@dataclass(frozen=True)
class BallCorrespondence:
    """Source balls of a cell paired with their image balls under f.

    The image balls are exactly the balls of the fitted image cell over
    the scanned window.  depth records the verification granularity.
    """

    pairs: tuple  # of (Ball, Ball)
    fitted_image_cell: Cell
    depth: int


@dataclass(frozen=True)
class CorrespondenceFailure:
    kind: str  # not_injective | image_not_ball | images_overlap |
    #            no_candidate_fits | image_not_single_cell | no_balls_in_window
    witnesses: tuple
    detail: str


class Tag(enum.Enum):
    FORWARD_1LIP = "Forward1Lip"
    INVERSE_1LIP = "Inverse1Lip"


@dataclass(frozen=True)
class BallClassification:
    ball: Ball
    tag: Tag
    certificate: JacobianCertificate


class CertificationFailed(Exception):
    def __init__(self, violation: JacobianViolation):
        super().__init__(violation.detail)
        self.violation = violation


@dataclass(frozen=True)
class CertificateCheck:
    passed: bool
    detail: str


def _fiber_variable(f: Term, var: Optional[str]) -> str:
    names = free_variables(f)
    if var is not None:
        if names and tuple(names) != (var,):
            extra = [n for n in names if n != var]
            if extra:
                raise ValueError(f"term is not univariate in {var!r}: uses {extra}")
        return var
    if len(names) > 1:
        raise ValueError(f"term must be univariate, found variables {names}")
    return names[0] if names else "t"


def check_jacobian_on_ball(
    f: Term, ball: Ball, depth: int, var: Optional[str] = None
):
    """Certify the Jacobian property of f on a ball at a given depth.

    Checks, on the canonical depth-M representatives and in this fixed
    order: (c) ord(f') constant and finite, (a) injectivity and that the
    image representatives tile a single ball of the radius forced by the
    derivative valuation, (d) the distance identity on all pairs.  Returns
    a JacobianCertificate or the first JacobianViolation found.
    """
    if depth < 1:
        raise ValueError("certification depth must be >= 1")
    var = _fiber_variable(f, var)
    ctx = ball.context
    deriv = differentiate(f, var)
    reps = ball.representatives(depth)

    # (c) constant, finite derivative valuation
    ords = [evaluate(deriv, {var: x}, ctx).ord() for x in reps]
    for x, o in zip(reps, ords):
        if o != ords[0]:
            return JacobianViolation(
                ViolationKind.C_JAC_ORD_VARIES,
                (reps[0], x),
                f"ord(f') is {ords[0]} at {reps[0]} but {o} at {x}",
            )
    if not ords[0].is_finite:
        return JacobianViolation(
            ViolationKind.C_JAC_ORD_VARIES,
            (reps[0],),
            f"ord(f') is +inf (derivative vanishes) at {reps[0]}",
        )
    jac_ord = ords[0].value

    # (a) injectivity and image tiling at the forced radius
    images = [evaluate(f, {var: x}, ctx) for x in reps]
    seen: dict = {}
    for x, fx in zip(reps, images):
        if fx.value in seen:
            return JacobianViolation(
                ViolationKind.A_NOT_INJECTIVE,
                (seen[fx.value], x),
                f"f({seen[fx.value]}) = f({x}) = {fx}",
            )
        seen[fx.value] = x
    image_radius = jac_ord + ball.radius_ord
    image_ball = Ball(images[0], image_radius)
    classes: dict = {}
    for x, fx in zip(reps, images):
        if not image_ball.contains(fx):
            return JacobianViolation(
                ViolationKind.A_IMAGE_NOT_BALL,
                (reps[0], x),
                f"f({x}) = {fx} falls outside {image_ball}",
            )
        key = fx.reduce_mod_power(image_radius + depth).value
        if key in classes:
            return JacobianViolation(
                ViolationKind.A_IMAGE_NOT_BALL,
                (classes[key], x),
                f"f({classes[key]}) and f({x}) collide in one residue class "
                f"of {image_ball}; the image cannot tile the ball",
            )
        classes[key] = x

    # (d) the exact distance identity on all representative pairs
    for i in range(len(reps)):
        for j in range(i + 1, len(reps)):
            lhs = (images[i] - images[j]).ord()
            rhs = (reps[i] - reps[j]).ord() + jac_ord
            if lhs != rhs:
                return JacobianViolation(
                    ViolationKind.D_DISTANCE_MISMATCH,
                    (reps[i], reps[j]),
                    f"ord(f(x)-f(y)) = {lhs} but ord(f') + ord(x-y) = {rhs} "
                    f"for x={reps[i]}, y={reps[j]}",
                )

    return JacobianCertificate(ball, image_ball, jac_ord, depth)


def map_ball(f: Term, ball: Ball, depth: int, var: Optional[str] = None):
    """Image of a ball under f, verified at depth M by residue tiling.

    If the depth-M image representatives fall in one minimal ball whose
    p^M residue classes they tile exactly, that ball is returned;
    otherwise NotABall carries two source points spanning the obstruction.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    var = _fiber_variable(f, var)
    ctx = ball.context
    reps = ball.representatives(depth)
    images = [evaluate(f, {var: x}, ctx) for x in reps]
    radius = None
    for fx in images[1:]:
        d = (fx - images[0]).ord()
        if d.is_finite and (radius is None or d.value < radius):
            radius = d.value
    if radius is None:
        return NotABall(
            (reps[0], reps[1]),
            f"f is constant ({images[0]}) on the representatives; the image is a point",
        )
    image_ball = Ball(images[0], radius)
    classes: dict = {}
    for x, fx in zip(reps, images):
        key = fx.reduce_mod_power(radius + depth).value
        if key in classes:
            return NotABall(
                (classes[key], x),
                f"images of {classes[key]} and {x} collide in one residue class of "
                f"{image_ball}: the image does not tile a ball at depth {depth}",
            )
        classes[key] = x
    return image_ball


def check_ball_correspondence(
    f: Term,
    cell: Cell,
    y: Optional[Mapping],
    window: Window,
    depth: int,
    extra_candidates: Iterable[PadicScalar] = (),
):
    """Map every ball of a cell above y and fit the images into one cell.

    f must be injective on the enumerated representatives of the fiber
    (checked, failure reported); every ball image must be a ball; images
    must be pairwise disjoint; the images are then fitted around candidate
    centers (f at the cell center when defined, 0, and caller extras).
    Success returns the ball pairing and the fitted image cell.
    """
    y = y or {}
    var = _fiber_variable(f, cell.fiber_var if not free_variables(f) else None)
    ctx = cell.context
    source_balls = enumerate_balls(cell, y, window)
    if not source_balls:
        return CorrespondenceFailure(
            "no_balls_in_window", (), f"the cell has no balls with level in {window}"
        )

    seen: dict = {}
    for ball in source_balls:
        for x in ball.representatives(depth):
            fx = evaluate(f, {var: x}, ctx)
            if fx.value in seen:
                return CorrespondenceFailure(
                    "not_injective",
                    (seen[fx.value], x),
                    f"f({seen[fx.value]}) = f({x}) = {fx}",
                )
            seen[fx.value] = x

    images = []
    for ball in source_balls:
        result = map_ball(f, ball, depth, var=var)
        if isinstance(result, NotABall):
            return CorrespondenceFailure(
                "image_not_ball",
                result.witnesses,
                f"image of {ball} is not a ball: {result.detail}",
            )
        images.append(result)

    for i in range(len(images)):
        for j in range(i + 1, len(images)):
            if images[i].relation(images[j]) is not BallRelation.DISJOINT:
                return CorrespondenceFailure(
                    "images_overlap",
                    (source_balls[i], source_balls[j]),
                    f"images {images[i]} and {images[j]} of {source_balls[i]} "
                    f"and {source_balls[j]} are not disjoint",
                )

    candidates = []
    try:
        c = cell.center_at(y)
        candidates.append(evaluate(f, {var: c}, ctx))
    except EvaluationError:
        pass
    candidates.append(ctx.scalar(0))
    candidates.extend(extra_candidates)
    try:
        fitted = fit_cell(images, candidates, fiber_var=var)
    except NoCandidateFits as err:
        return CorrespondenceFailure(
            "no_candidate_fits", tuple(err.failures), str(err)
        )
    if len(fitted) != 1:
        return CorrespondenceFailure(
            "image_not_single_cell",
            tuple(fitted),
            f"image balls need {len(fitted)} cells; a single cell was required",
        )
    return BallCorrespondence(tuple(zip(source_balls, images)), fitted[0], depth)


def classify_forward_or_inverse_lipschitz(
    f: Term, cell: Cell, y: Optional[Mapping], window: Window, depth: int
) -> list:
    """Tag each certified ball of the cell by |f'| <= 1 or |f'| > 1.

    jac_ord >= 0 means |f'| <= 1 on the ball and f restricted to it is
    1-Lipschitz (Forward1Lip); jac_ord < 0 means the inverse is locally
    1-Lipschitz (Inverse1Lip).  By the distance identity the tag is exact,
    not sampled.  Certification failures raise CertificationFailed.
    """
    y = y or {}
    out = []
    for ball in enumerate_balls(cell, y, window):
        result = check_jacobian_on_ball(f, ball, depth)
        if isinstance(result, JacobianViolation):
            raise CertificationFailed(result)
        tag = Tag.FORWARD_1LIP if result.jac_ord >= 0 else Tag.INVERSE_1LIP
        out.append(BallClassification(ball, tag, result))
    return out


def verify_certificate(f: Term, certificate: JacobianCertificate) -> CertificateCheck:
    """Re-check a certificate against a fresh certification run.

    Detects any tampering with jac_ord or the image ball: the image radius
    law radius(image) = jac_ord + radius(ball) is checked structurally and
    the certification is re-run at the recorded depth.
    """
    expected = certificate.jac_ord + certificate.ball.radius_ord
    if certificate.image.radius_ord != expected:
        return CertificateCheck(
            False,
            f"image radius law broken: radius_ord(image) = "
            f"{certificate.image.radius_ord} but jac_ord + radius_ord(ball) = {expected}",
        )
    result = check_jacobian_on_ball(f, certificate.ball, certificate.verified_depth)
    if isinstance(result, JacobianViolation):
        return CertificateCheck(
            False, f"re-certification found a violation: {result.detail}"
        )
    if result.jac_ord != certificate.jac_ord:
        return CertificateCheck(
            False,
            f"stored jac_ord {certificate.jac_ord} disagrees with recomputed "
            f"{result.jac_ord} (witness: any representative pair of {certificate.ball})",
        )
    if result.image != certificate.image:
        return CertificateCheck(
            False,
            f"stored image {certificate.image} disagrees with recomputed {result.image}",
        )
    return CertificateCheck(True, "certificate reproduced exactly")
