"""Reference implementation of the noisy zeroth-order update.

Randomness is counter-based: every draw comes from a Philox stream keyed
by (seed, step, purpose), so trajectories replay bit-exactly and frames,
directional noise, isotropic noise, and batch sampling are independent
streams regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import ValidationError
from .params import ProblemParams

_PURPOSE_FRAME = 0
_PURPOSE_DIR_NOISE = 1
_PURPOSE_ISO_NOISE = 2
_PURPOSE_BATCH = 3


def _stream(seed: int, t: int, purpose: int) -> np.random.Generator:
    key = (int(seed) << 64) | (int(t) << 4) | purpose
    return np.random.Generator(np.random.Philox(key=key))


def clip(y: np.ndarray, Delta: float) -> np.ndarray:
    """Norm clip y / max(1, |y|/Delta), elementwise on scalars."""
    y = np.asarray(y, dtype=float)
    return y / np.maximum(1.0, np.abs(y) / Delta)


def project_ball(w: np.ndarray, R: float) -> np.ndarray:
    """Euclidean projection onto the radius-R ball."""
    norm = float(np.linalg.norm(w))
    if norm <= R:
        return w
    return w * (R / norm)


@dataclass(frozen=True)
class DirectionFrame:
    """K update directions; orthonormal columns in stiefel mode."""

    U: np.ndarray  # (d, K)
    mode: str

    def __post_init__(self) -> None:
        U = np.asarray(self.U, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "U", U)
        if self.mode not in ("stiefel", "iid_sphere"):
            raise ValidationError(f"unknown frame mode {self.mode!r}")

    @property
    def K(self) -> int:
        return self.U.shape[1]


def sample_frame(d: int, K: int, mode: str = "stiefel", rng: Optional[np.random.Generator] = None) -> DirectionFrame:
    """Draw K directions in R^d.

    stiefel: orthonormalize a Gaussian matrix with the triangular
    factor's diagonal signs fixed, which is invariant under left
    rotation and hence uniform on the Stiefel manifold.  iid_sphere:
    K independent uniform unit vectors.
    """
    if not 1 <= K <= d:
        raise ValidationError(f"need 1 <= K <= d, got K={K}, d={d}")
    if rng is None:
        rng = np.random.default_rng()
    G = rng.standard_normal((d, K))
    if mode == "stiefel":
        Q, Rmat = np.linalg.qr(G)
        signs = np.sign(np.diag(Rmat))
        signs[signs == 0] = 1.0
        return DirectionFrame(U=Q * signs, mode=mode)
    if mode == "iid_sphere":
        U = G / np.linalg.norm(G, axis=0, keepdims=True)
        return DirectionFrame(U=U, mode=mode)
    raise ValidationError(f"unknown frame mode {mode!r}")


# ---------------------------------------------------------------------------
# loss oracles
# ---------------------------------------------------------------------------


class QuadraticLoss:
    """Per-sample loss (m/2)|w|^2 + ((M-m)/2) <v, w>^2 + <x_i, w>.

    The Hessian m I + (M-m) v v^T has spectrum {m, ..., m, M}, so the
    oracle is exactly M-smooth and m-strongly convex.  Its gradient norm
    on the radius-R ball is at most M R + max_i |x_i|.
    """

    def __init__(self, M: float, m: float, v: np.ndarray):
        if not 0.0 <= m <= M:
            raise ValidationError("need 0 <= m <= M")
        v = np.asarray(v, dtype=float)
        self.M = float(M)
        self.m = float(m)
        self.v = v / np.linalg.norm(v)

    def losses(self, w: np.ndarray, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        quad = 0.5 * self.m * float(w @ w) + 0.5 * (self.M - self.m) * float(self.v @ w) ** 2
        return quad + X[idx] @ w

    def grads(self, w: np.ndarray, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        g_common = self.m * w + (self.M - self.m) * float(self.v @ w) * self.v
        return g_common[None, :] + X[idx]

    def mean_loss(self, w: np.ndarray, X: np.ndarray) -> float:
        return float(np.mean(self.losses(w, X, np.arange(X.shape[0]))))

    def lipschitz_bound(self, X: np.ndarray, R: float) -> float:
        return self.M * R + float(np.max(np.linalg.norm(X, axis=1)))

    def minimizer(self, X: np.ndarray) -> np.ndarray:
        """Unique minimizer of the averaged loss (Sherman-Morrison)."""
        xbar = np.mean(X, axis=0)
        return -(xbar / self.m) + (self.M - self.m) * float(self.v @ xbar) / (
            self.m * self.M
        ) * self.v


class LogisticLoss:
    """Per-sample loss log(1 + exp(-y_i <x_i, w>)) with labels y = +/-1.

    Smoothness max_i |x_i|^2 / 4 and Lipschitz constant max_i |x_i| hold
    for every w, m = 0 (convex).
    """

    def __init__(self, y: np.ndarray):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValidationError("labels must be +/-1")
        self.y = y
        self.m = 0.0

    def losses(self, w: np.ndarray, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        margins = self.y[idx] * (X[idx] @ w)
        return np.logaddexp(0.0, -margins)

    def grads(self, w: np.ndarray, X: np.ndarray, idx: np.ndarray) -> np.ndarray:
        margins = self.y[idx] * (X[idx] @ w)
        s = 1.0 / (1.0 + np.exp(margins))
        return -(self.y[idx] * s)[:, None] * X[idx]

    def mean_loss(self, w: np.ndarray, X: np.ndarray) -> float:
        return float(np.mean(self.losses(w, X, np.arange(X.shape[0]))))

    def smoothness_bound(self, X: np.ndarray) -> float:
        return float(np.max(np.sum(X * X, axis=1))) / 4.0

    def lipschitz_bound(self, X: np.ndarray, R: float) -> float:
        return float(np.max(np.linalg.norm(X, axis=1)))


def make_quadratic_problem(
    d: int, n: int, M: float, m: float, data_norm: float, seed: int
) -> tuple:
    """Seeded dataset (n x d, rows scaled to data_norm) and matching oracle."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    X *= data_norm / np.linalg.norm(X, axis=1, keepdims=True)
    v = rng.standard_normal(d)
    return QuadraticLoss(M=M, m=m, v=v), X


# ---------------------------------------------------------------------------
# estimator and update
# ---------------------------------------------------------------------------


def zo_gradient(
    w: np.ndarray,
    frame: DirectionFrame,
    loss,
    X: np.ndarray,
    indices: np.ndarray,
    xi: float,
    Delta: float,
) -> np.ndarray:
    """Two-point estimate sum_k mean_i clip(finite difference; Delta) u_k.

    xi = 0 means the analytic directional derivative <grad l_i(w), u_k>,
    the xi -> 0 limit, useful for discretization-free verification.  The
    clip is always applied, so the per-direction scalar magnitude stays
    within Delta even for oracles that violate their declared constants.
    """
    indices = np.asarray(indices)
    if indices.size == 0:
        raise ValidationError("indices must be non-empty")
    if xi < 0:
        raise ValidationError(f"xi must be >= 0, got {xi}")
    U = frame.U
    if xi == 0.0:
        G = loss.grads(w, X, indices)  # (b, d)
        per_sample = G @ U  # (b, K)
    else:
        cols = []
        for k in range(U.shape[1]):
            u = U[:, k]
            lp = loss.losses(w + xi * u, X, indices)
            lm = loss.losses(w - xi * u, X, indices)
            cols.append((lp - lm) / (2.0 * xi))
        per_sample = np.stack(cols, axis=1)
    s = np.mean(clip(per_sample, Delta), axis=0)  # (K,)
    return U @ s


def zo_update_map(
    w: np.ndarray,
    frame: DirectionFrame,
    loss,
    X: np.ndarray,
    eta: float,
    K: int,
    xi: float,
    Delta: float,
) -> np.ndarray:
    """Noiseless unprojected update w - (eta/K) * zo_gradient(w)."""
    idx = np.arange(X.shape[0])
    return w - (eta / K) * zo_gradient(w, frame, loss, X, idx, xi, Delta)


def _dir_noise_std(sigma: float, beta: float) -> float:
    return math.sqrt(beta) * sigma


def _iso_noise_std(sigma: float, beta: float) -> float:
    return math.sqrt(1.0 - beta) * sigma


def noisy_zogd_step(
    w: np.ndarray,
    frame: DirectionFrame,
    loss,
    X: np.ndarray,
    params: ProblemParams,
    beta_t: float,
    rng_dir: np.random.Generator,
    rng_iso: np.random.Generator,
    indices: Optional[np.ndarray] = None,
) -> np.ndarray:
    """One projected update with directional and isotropic Gaussian noise."""
    if not 0.0 <= beta_t <= 1.0:
        raise ValidationError(f"beta_t must be in [0, 1], got {beta_t}")
    d, K = params.d, params.K
    if indices is None:
        indices = np.arange(X.shape[0])
    g = zo_gradient(w, frame, loss, X, indices, params.xi, params.Delta)
    g1 = rng_dir.standard_normal(K) * _dir_noise_std(params.sigma, beta_t)
    g2 = rng_iso.standard_normal(d) * _iso_noise_std(params.sigma, beta_t)
    w_next = (
        w
        - (params.eta / K) * g
        + (params.eta / math.sqrt(K)) * (frame.U @ g1)
        + (params.eta / math.sqrt(d)) * g2
    )
    return project_ball(w_next, params.R)


@dataclass
class Trajectory:
    """A full run, replayable bit-exactly from (params, config, seed)."""

    seed: int
    params: ProblemParams
    mode: str
    beta: np.ndarray  # (T,)
    iterates: np.ndarray  # (T+1, d)
    frames: Optional[List[DirectionFrame]] = None
    batches: Optional[List[np.ndarray]] = None
    losses: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return len(self.beta)


def _beta_array(beta_schedule: Union[float, Sequence[float]], T: int) -> np.ndarray:
    if np.isscalar(beta_schedule):
        arr = np.full(T, float(beta_schedule))
    else:
        arr = np.asarray(beta_schedule, dtype=float)
        if arr.shape != (T,):
            raise ValidationError(f"beta schedule must have length T={T}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("beta values must lie in [0, 1]")
    return arr


def run(
    params: ProblemParams,
    loss,
    X: np.ndarray,
    T: int,
    beta_schedule: Union[float, Sequence[float]],
    seed: int,
    mode: str = "stiefel",
    w0: Optional[np.ndarray] = None,
    record_frames: bool = False,
    record_losses: bool = True,
) -> Trajectory:
    """Iterate the noisy update for T steps.

    Full batch uses every index each step; with params.batch set, each
    step draws that many indices without replacement from its own
    stream.
    """
    X = np.asarray(X, dtype=float)
    if X.shape != (params.n, params.d):
        raise ValidationError(f"dataset must be shaped (n, d) = {(params.n, params.d)}")
    if T < 0:
        raise ValidationError(f"T must be >= 0, got {T}")
    beta = _beta_array(beta_schedule, T)
    w = np.zeros(params.d) if w0 is None else project_ball(np.asarray(w0, dtype=float), params.R)
    iterates = np.empty((T + 1, params.d))
    iterates[0] = w
    frames: List[DirectionFrame] = []
    batches: List[np.ndarray] = []
    losses = np.empty(T + 1) if record_losses else None
    if record_losses:
        losses[0] = loss.mean_loss(w, X)
    for t in range(T):
        frame = sample_frame(params.d, params.K, mode, _stream(seed, t, _PURPOSE_FRAME))
        if params.batch is not None and params.batch < params.n:
            idx = _stream(seed, t, _PURPOSE_BATCH).choice(
                params.n, size=params.batch, replace=False
            )
        else:
            idx = np.arange(params.n)
        w = noisy_zogd_step(
            w,
            frame,
            loss,
            X,
            params,
            beta[t],
            _stream(seed, t, _PURPOSE_DIR_NOISE),
            _stream(seed, t, _PURPOSE_ISO_NOISE),
            indices=idx,
        )
        iterates[t + 1] = w
        if record_frames:
            frames.append(frame)
            batches.append(idx)
        if record_losses:
            losses[t + 1] = loss.mean_loss(w, X)
    return Trajectory(
        seed=seed,
        params=params,
        mode=mode,
        beta=beta,
        iterates=iterates,
        frames=frames if record_frames else None,
        batches=batches if record_frames else None,
        losses=losses,
    )


def run_adjacent_pair(
    params: ProblemParams,
    loss,
    X: np.ndarray,
    replaced_index: int,
    replacement: np.ndarray,
    T: int,
    seed: int,
    beta_schedule: Union[float, Sequence[float]] = 0.5,
    mode: str = "stiefel",
) -> tuple:
    """Coupled runs on datasets differing at one index.

    Both runs share all frames, noise draws, and batch choices (the same
    seed keys the same streams); only the dataset differs.
    """
    if not 0 <= replaced_index < params.n:
        raise ValidationError(f"replaced_index must be in [0, n), got {replaced_index}")
    X_alt = np.array(X, dtype=float, copy=True)
    X_alt[replaced_index] = np.asarray(replacement, dtype=float)
    traj = run(params, loss, X, T, beta_schedule, seed, mode)
    traj_alt = run(params, loss, X_alt, T, beta_schedule, seed, mode)
    return traj, traj_alt


def export_trajectory_csv(
    path: str,
    traj: Trajectory,
    paired: Optional[Trajectory] = None,
) -> None:
    """Write (t, |w_t|, loss, [distance]) rows; LF endings, repr precision."""
    norms = np.linalg.norm(traj.iterates, axis=1)
    header = "t,w_norm,loss"
    dist = None
    if paired is not None:
        dist = np.linalg.norm(traj.iterates - paired.iterates, axis=1)
        header += ",distance"
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for t in range(traj.T + 1):
            row = [str(t), repr(float(norms[t]))]
            row.append(repr(float(traj.losses[t])) if traj.losses is not None else "")
            if dist is not None:
                row.append(repr(float(dist[t])))
            fh.write(",".join(row) + "\n")
