"""Non-rigid point-set registration by EM over a Gaussian mixture.

The source points ``X`` (garment edge keypoints) are the moving means of an
isotropic GMM, ``f(x_i)``; the target points ``Y`` are the data. A uniform
component with weight ``gamma`` absorbs target points that have no partner
(occlusions, clutter). The deformation is a Gaussian radial-kernel
displacement field::

    f(x) = x + sum_k G(x, x_k) W_k,    G(u, v) = exp(-|u - v|^2 / (2 beta^2))

regularised by its kernel norm ``trace(W^T G W)``.

All EM work happens on normalised coordinates (each set zero-mean with unit
RMS radius); :class:`NonRigidTransform` folds the normalisation back in so it
maps pixels to pixels.
"""

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .errors import AllOutliers, DegenerateScale, InvalidParams, SingularSystem

D = 2
# normalised-units Hausdorff distance below which X and Y count as coincident
ALIGNED_TOL = 1e-9


@dataclass(frozen=True)
class RegistrationConfig:
    lambda2: float = 0.5
    gamma: float = 0.1
    kernel_beta: float = 0.75
    max_iters: int = 150
    tol: float = 1e-5
    sigma_floor: float = 1e-8

    def __post_init__(self):
        if not self.lambda2 >= 0:
            raise InvalidParams("lambda2 must be >= 0")
        if not 0 <= self.gamma < 1:
            raise InvalidParams("gamma must lie in [0, 1)")
        if not self.kernel_beta > 0:
            raise InvalidParams("kernel_beta must be > 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidParams("max_iters must be an integer >= 1")
        if not self.tol > 0:
            raise InvalidParams("tol must be > 0")
        if not self.sigma_floor > 0:
            raise InvalidParams("sigma_floor must be > 0")


@dataclass(frozen=True)
class Denorm:
    src_mean: tuple
    src_scale: float
    dst_mean: tuple
    dst_scale: float

    @classmethod
    def identity(cls):
        return cls((0.0, 0.0), 1.0, (0.0, 0.0), 1.0)

    def to_source(self, pts):
        return (np.asarray(pts, dtype=np.float64) - self.src_mean) / self.src_scale

    def from_target(self, pts):
        return np.asarray(pts, dtype=np.float64) * self.dst_scale + self.dst_mean


@dataclass(frozen=True, eq=False)
class CorrespondenceMatrix:
    """``probs[i, j]`` is the posterior that target ``j`` was generated by
    source ``i``; ``column_outlier_mass[j]`` is what the uniform component took."""

    probs: np.ndarray
    column_outlier_mass: np.ndarray


@dataclass(eq=False)
class RegistrationDiagnostics:
    energy: list = field(default_factory=list)
    sigma2: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rmse: float = float("nan")
    # "aligned", "tolerance", "energy_increase" or "max_iters"
    stop_reason: str = "max_iters"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class NonRigidTransform:
    base_points: np.ndarray
    weights: np.ndarray
    kernel_beta: float
    denorm: Denorm = field(default_factory=Denorm.identity)

    def __post_init__(self):
        base = np.asarray(self.base_points, dtype=np.float64).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1, 2)
        if len(base) != len(w):
            raise InvalidParams("weights must have one row per base point")
        object.__setattr__(self, "base_points", base)
        object.__setattr__(self, "weights", w)

    def displacement(self, normalized_pts):
        return gaussian_kernel(normalized_pts, self.base_points, self.kernel_beta) @ self.weights

    def __call__(self, pts):
        return apply_transform(self, pts)

    def to_dict(self):
        return {
            "base_points": self.base_points.tolist(),
            "weights": self.weights.tolist(),
            "kernel_beta": self.kernel_beta,
            "denorm": {
                "src_mean": list(self.denorm.src_mean),
                "src_scale": self.denorm.src_scale,
                "dst_mean": list(self.denorm.dst_mean),
                "dst_scale": self.denorm.dst_scale,
            },
        }

    @classmethod
    def from_dict(cls, d):
        dn = d["denorm"]
        denorm = Denorm(
            tuple(float(v) for v in dn["src_mean"]),
            float(dn["src_scale"]),
            tuple(float(v) for v in dn["dst_mean"]),
            float(dn["dst_scale"]),
        )
        return cls(
            np.array(d["base_points"], dtype=np.float64),
            np.array(d["weights"], dtype=np.float64),
            float(d["kernel_beta"]),
            denorm,
        )


def _as_points(pts, name="points"):
    p = np.asarray(pts, dtype=np.float64)
    if p.ndim != 2 or p.shape[1] != 2 or len(p) == 0:
        raise InvalidParams(f"{name} must be a non-empty (N, 2) array")
    if not np.isfinite(p).all():
        raise InvalidParams(f"{name} must be finite")
    return p


def sq_distances(a, b):
    """Pairwise squared distances, shape (len(a), len(b))."""
    diff = a[:, None, :] - b[None, :, :]
    return (diff * diff).sum(axis=-1)


def gaussian_kernel(a, b, beta):
    return np.exp(-sq_distances(a, b) / (2.0 * beta * beta))


def normalize_points(pts):
    """Return ``(normalized, mean, scale)`` with zero mean and unit RMS radius."""
    p = _as_points(pts)
    if len(p) < 3:
        raise InvalidParams("normalisation needs at least 3 points")
    mean = p.mean(axis=0)
    centred = p - mean
    scale = math.sqrt(float((centred * centred).sum(axis=1).mean()))
    if scale < 1e-9:
        raise DegenerateScale(f"point set has RMS radius {scale:.3g}")
    return centred / scale, mean, scale


def normalize_pair(X, Y):
    Xn, xm, xs = normalize_points(X)
    Yn, ym, ys = normalize_points(Y)
    denorm = Denorm((float(xm[0]), float(xm[1])), xs, (float(ym[0]), float(ym[1])), ys)
    return Xn, Yn, denorm


def outlier_support_area(Y):
    """Area of the region the uniform outlier density lives on: the convex
    hull of ``Y`` (rotation invariant, unlike an axis-aligned box)."""
    try:
        area = ConvexHull(Y).volume
    except (QhullError, ValueError):
        area = float(np.prod(Y.max(axis=0) - Y.min(axis=0)))
    return area if area > 0 else 1.0


def e_step(Y, FX, sigma2, gamma, pi, a):
    """Posterior correspondences under the GMM + uniform mixture.

    ``FX`` are the current component means f(x_i), ``Y`` the data. Each
    column is shifted by its largest log-term before exponentiating.
    """
    Y = np.asarray(Y, dtype=np.float64)
    FX = np.asarray(FX, dtype=np.float64)
    pi = np.asarray(pi, dtype=np.float64)
    if not sigma2 > 0:
        raise InvalidParams("sigma2 must be > 0")
    if not a > 0:
        raise InvalidParams("outlier support area must be > 0")
    with np.errstate(divide="ignore"):
        log_terms = np.log(pi)[:, None] - sq_distances(FX, Y) / (2.0 * sigma2)
    shift = log_terms.max(axis=0)
    if gamma > 0:
        log_out = (
            math.log(gamma)
            + (D / 2) * math.log(2.0 * math.pi * sigma2)
            - math.log((1.0 - gamma) * a)
        )
        shift = np.maximum(shift, log_out)
        out = np.exp(log_out - shift)
    else:
        out = np.zeros(Y.shape[0])
    num = np.exp(log_terms - shift)
    denom = num.sum(axis=0) + out
    return CorrespondenceMatrix(num / denom, out / denom)


def m_step(X, Y, P, G, lambda2):
    """Solve ``(diag(P 1) G + lambda2 I) W = P Y - diag(P 1) X``.

    This is the exact minimiser over ``W`` of :func:`evaluate_energy` for a
    fixed ``P``. The ridge is ``lambda2`` alone, not ``lambda2 * sigma2``:
    with the sigma-scaled ridge the regulariser vanishes as sigma2 anneals
    and ``W`` blows up on exact data.
    """
    probs = P.probs if isinstance(P, CorrespondenceMatrix) else np.asarray(P)
    row_mass = probs.sum(axis=1)
    A = row_mass[:, None] * G
    A[np.diag_indices_from(A)] += lambda2
    rhs = probs @ Y - row_mass[:, None] * X
    if not rhs.any():
        return np.zeros_like(rhs)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            W = scipy.linalg.solve(A, rhs, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularSystem(f"M-step system is singular (lambda2={lambda2:.3g}): {exc}") from None
    if not np.isfinite(W).all():
        raise SingularSystem("M-step produced non-finite weights")
    return W


def update_sigma(Y, FX, P, sigma_floor=1e-8):
    probs = P.probs if isinstance(P, CorrespondenceMatrix) else np.asarray(P)
    total = probs.sum()
    if total < 1e-12:
        raise AllOutliers("every target point was assigned to the outlier component")
    s2 = float((probs * sq_distances(FX, Y)).sum() / (D * total))
    return max(s2, sigma_floor)


def evaluate_energy(X, Y, P, W, G, lambda2):
    """Expected residual plus ``lambda2 * trace(W^T G W)``."""
    probs = P.probs if isinstance(P, CorrespondenceMatrix) else np.asarray(P)
    FX = X + G @ W
    data = float((probs * sq_distances(FX, Y)).sum())
    return data + lambda2 * float(np.trace(W.T @ G @ W))


def apply_transform(t, pts):
    p = _as_points(pts)
    pn = t.denorm.to_source(p)
    return t.denorm.from_target(pn + t.displacement(pn))


def nearest_rmse(A, B):
    return math.sqrt(float(sq_distances(A, B).min(axis=1).mean()))


def hausdorff(A, B):
    """Symmetric Hausdorff distance between two point sets."""
    return max(float(cKDTree(B).query(A)[0].max()), float(cKDTree(A).query(B)[0].max()))


def register(X, Y, config=None):
    """Register source ``X`` onto target ``Y``.

    Returns ``(transform, diagnostics)``; ``transform`` maps pixel coordinates
    of the source frame into the target frame.
    """
    config = config or RegistrationConfig()
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    Xn, Yn, denorm = normalize_pair(X, Y)
    m = len(Xn)

    G = gaussian_kernel(Xn, Xn, config.kernel_beta)
    W = np.zeros_like(Xn)
    FX = Xn
    sigma2 = max(float(sq_distances(Xn, Yn).mean()) / D, config.sigma_floor)
    pi = np.full(m, 1.0 / m)
    a = outlier_support_area(Yn)

    diag = RegistrationDiagnostics()
    if hausdorff(Xn, Yn) < ALIGNED_TOL:
        # W = 0 is the exact solution; annealing would only shrink sigma2
        diag.converged = True
        diag.stop_reason = "aligned"
        diag.rmse = nearest_rmse(denorm.from_target(FX), Y)
        return NonRigidTransform(Xn, W, config.kernel_beta, denorm), diag

    P = e_step(Yn, FX, sigma2, config.gamma, pi, a)
    for _ in range(config.max_iters):
        W_new = m_step(Xn, Yn, P, G, config.lambda2)
        FX_new = Xn + G @ W_new
        # annealing: sigma2 never grows, otherwise P broadens and the energy rises
        new_sigma2 = min(update_sigma(Yn, FX_new, P, config.sigma_floor), sigma2)
        P_new = e_step(Yn, FX_new, new_sigma2, config.gamma, pi, a)
        energy = evaluate_energy(Xn, Yn, P_new, W_new, G, config.lambda2)
        # the M-step cannot raise the energy but the E-step can; near the
        # optimum that is the only movement left, so stop on the last descent
        if diag.energy and energy > diag.energy[-1]:
            diag.converged = True
            diag.stop_reason = "energy_increase"
            break
        W, FX, P = W_new, FX_new, P_new
        diag.energy.append(energy)
        diag.sigma2.append(new_sigma2)
        diag.iterations += 1
        change = abs(new_sigma2 - sigma2) / sigma2
        sigma2 = new_sigma2
        if change < config.tol:
            diag.converged = True
            diag.stop_reason = "tolerance"
            break

    transform = NonRigidTransform(Xn, W, config.kernel_beta, denorm)
    diag.rmse = nearest_rmse(denorm.from_target(FX), Y)
    return transform, diag
