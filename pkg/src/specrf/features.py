"""Random and deterministic finite-rank feature maps.

A feature map embeds inputs into R^(p*M) so that the Euclidean inner
product of two embeddings is a Monte Carlo estimate (exact, for the
finite-rank designer map) of a kernel with an integral representation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

GAUSSIAN_RFF = "gaussian_rff"
NTK_ONE_LAYER = "ntk_one_layer"
DESIGNER_FINITE_RANK = "designer_finite_rank"

KINDS = (GAUSSIAN_RFF, NTK_ONE_LAYER, DESIGNER_FINITE_RANK)
ACTIVATIONS = ("relu", "tanh", "identity")

DEFAULT_NTK_RHO_MAX = 10.0
# empirical kappa^2 bounds for unbounded activations get this headroom
NTK_KAPPA_MARGIN = 1.1
DEFAULT_MEMORY_BUDGET = 2 * 1024**3  # bytes


class MemoryBudgetError(RuntimeError):
    """Raised when an operation would allocate past the configured budget."""


@dataclass(frozen=True)
class FeatureMap:
    """Immutable sampled feature map; frequencies are fully seed-determined."""

    kind: str
    input_dim: int
    num_samples: int
    component_count: int
    params: dict
    seed: int
    frequencies: np.ndarray = field(repr=False)
    phases: np.ndarray | None = field(repr=False, default=None)
    kappa_sq: float = 0.0
    kappa_certified: bool = True

    @property
    def embedding_dim(self) -> int:
        return self.component_count * self.num_samples

    def descriptor(self) -> dict:
        """JSON-serializable descriptor; frequencies regenerate from the seed."""
        params = dict(self.params)
        if "eigenvalues" in params:
            params["eigenvalues"] = [float(v) for v in params["eigenvalues"]]
        return {
            "kind": self.kind,
            "input_dim": self.input_dim,
            "num_samples": self.num_samples,
            "params": params,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "FeatureMap":
        d = json.loads(text)
        return sample_feature_map(
            d["kind"], d["input_dim"], d["num_samples"], d["params"], d["seed"]
        )


def designer_basis(num_funcs: int, x: np.ndarray) -> np.ndarray:
    """Orthonormal cosine basis on L^2([0,1]): e_1 = 1, e_j = sqrt(2) cos((j-1) pi x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    j = np.arange(num_funcs)
    out = np.sqrt(2.0) * np.cos(np.pi * np.outer(x, j))
    out[:, 0] = 1.0
    return out


def _validate_designer_eigenvalues(mu: np.ndarray, rank: int) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size != rank:
        raise ValueError(f"expected {rank} eigenvalues, got shape {mu.shape}")
    if np.any(mu <= 0):
        raise ValueError("designer eigenvalues must be strictly positive")
    if np.any(np.diff(mu) > 0):
        raise ValueError("designer eigenvalues must be non-increasing")
    return mu


def sample_feature_map(
    kind: str, input_dim: int, num_samples: int, params: dict, seed: int
) -> FeatureMap:
    """Draw the map's frequencies from its sampling measure, seeded.

    For the designer map the "frequencies" are the deterministic index set
    1..rank and the seed is recorded but unused.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown feature map kind {kind!r}")
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    params = dict(params)
    rng = np.random.default_rng(seed)

    if kind == GAUSSIAN_RFF:
        bandwidth = float(params.get("bandwidth", 1.0))
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        params["bandwidth"] = bandwidth
        freqs = rng.standard_normal((num_samples, input_dim)) / bandwidth
        phases = rng.uniform(0.0, 2.0 * np.pi, num_samples)
        return FeatureMap(
            kind=kind,
            input_dim=input_dim,
            num_samples=num_samples,
            component_count=1,
            params=params,
            seed=seed,
            frequencies=freqs,
            phases=phases,
            kappa_sq=2.0,
        )

    if kind == NTK_ONE_LAYER:
        activation = params.get("activation", "relu")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        tau = float(params.get("tau", 1.0))
        gamma = float(params.get("gamma", 1.0))
        rho_max = float(params.get("rho_max", DEFAULT_NTK_RHO_MAX))
        if tau < 0 or gamma < 0 or rho_max <= 0:
            raise ValueError("tau, gamma must be >= 0 and rho_max > 0")
        params.update(activation=activation, tau=tau, gamma=gamma, rho_max=rho_max)
        freqs = rng.standard_normal((num_samples, input_dim))
        if activation == "tanh":
            # sup|tanh| = sup|tanh'| = 1 on any domain
            kappa_sq = tau**2 * rho_max**2 + 1.0 + tau**2 * gamma**2
            certified = True
        else:
            # relu/identity: sigma' is in {0,1} resp. 1, |sigma(w.x)| <= |w.x|
            # <= ||w|| rho_max; per-frequency empirical bound, reported only
            sup_wx_sq = float(np.max(np.sum(freqs**2, axis=1))) * rho_max**2
            kappa_sq = NTK_KAPPA_MARGIN * (
                tau**2 * rho_max**2 + sup_wx_sq + tau**2 * gamma**2
            )
            certified = False
        return FeatureMap(
            kind=kind,
            input_dim=input_dim,
            num_samples=num_samples,
            component_count=input_dim + 2,
            params=params,
            seed=seed,
            frequencies=freqs,
            kappa_sq=kappa_sq,
            kappa_certified=certified,
        )

    # designer finite-rank map
    if input_dim != 1:
        raise ValueError("designer map is defined on X = [0,1], input_dim must be 1")
    decay = float(params.get("decay_exponent", 1.0))
    if "eigenvalues" in params:
        mu = _validate_designer_eigenvalues(params["eigenvalues"], num_samples)
    else:
        mu = np.arange(1, num_samples + 1, dtype=float) ** (-1.0 / decay)
    params["eigenvalues"] = mu
    params["decay_exponent"] = decay
    sup_sq = np.full(num_samples, 2.0)
    sup_sq[0] = 1.0
    return FeatureMap(
        kind=kind,
        input_dim=1,
        num_samples=num_samples,
        component_count=1,
        params=params,
        seed=seed,
        frequencies=np.arange(1, num_samples + 1, dtype=float),
        kappa_sq=float(np.sum(mu * sup_sq)),
    )


def _check_input(feature_map: FeatureMap, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (feature_map.input_dim,):
        raise ValueError(
            f"expected input of dimension {feature_map.input_dim}, got shape {x.shape}"
        )
    if feature_map.kind == NTK_ONE_LAYER:
        rho_max = feature_map.params["rho_max"]
        if np.linalg.norm(x) > rho_max:
            raise ValueError(f"NTK input norm exceeds rho_max = {rho_max}")
    return x


def embed(feature_map: FeatureMap, x: np.ndarray) -> np.ndarray:
    """Embed a single input; see feature_matrix for the batched version."""
    x = _check_input(feature_map, x)
    return _embed_rows(feature_map, x[None, :])[0]


def _embed_rows(feature_map: FeatureMap, X: np.ndarray) -> np.ndarray:
    scale = 1.0 / np.sqrt(feature_map.num_samples)
    if feature_map.kind == GAUSSIAN_RFF:
        proj = X @ feature_map.frequencies.T + feature_map.phases
        return scale * np.sqrt(2.0) * np.cos(proj)

    if feature_map.kind == DESIGNER_FINITE_RANK:
        mu = feature_map.params["eigenvalues"]
        # deterministic features sqrt(mu_j) e_j(x); no Monte Carlo scaling
        return designer_basis(feature_map.num_samples, X[:, 0]) * np.sqrt(mu)

    # NTK: components tau*x_i*act'(w.x) for i in [d], act(w.x), tau*gamma*act'(w.x)
    activation = feature_map.params["activation"]
    tau = feature_map.params["tau"]
    gamma = feature_map.params["gamma"]
    proj = X @ feature_map.frequencies.T  # n x M
    if activation == "relu":
        act = np.maximum(proj, 0.0)
        dact = (proj > 0).astype(float)  # act'(0) := 0
    elif activation == "tanh":
        act = np.tanh(proj)
        dact = 1.0 - act**2
    else:
        act = proj
        dact = np.ones_like(proj)
    n, M = proj.shape
    d = feature_map.input_dim
    out = np.empty((n, (d + 2) * M))
    for i in range(d):
        out[:, i * M : (i + 1) * M] = tau * X[:, i : i + 1] * dact
    out[:, d * M : (d + 1) * M] = act
    out[:, (d + 1) * M :] = tau * gamma * dact
    return scale * out


def feature_matrix(
    feature_map: FeatureMap,
    X: np.ndarray,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> np.ndarray:
    """Stack embeddings of the rows of X into an n x (p*M) matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or (X.shape[0] > 0 and X.shape[1] != feature_map.input_dim):
        raise ValueError(
            f"expected n x {feature_map.input_dim} input, got shape {X.shape}"
        )
    n = X.shape[0]
    needed = n * feature_map.embedding_dim * 8
    if needed > memory_budget:
        raise MemoryBudgetError(
            f"feature matrix needs {needed} bytes, budget is {memory_budget}"
        )
    if n == 0:
        return np.zeros((0, feature_map.embedding_dim))
    if feature_map.kind == NTK_ONE_LAYER:
        rho_max = feature_map.params["rho_max"]
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms > rho_max):
            raise ValueError(f"NTK input norm exceeds rho_max = {rho_max}")
    return _embed_rows(feature_map, X)


def approx_kernel(feature_map: FeatureMap, x: np.ndarray, y: np.ndarray) -> float:
    """K_M(x, y) = <embed(x), embed(y)>."""
    return float(embed(feature_map, x) @ embed(feature_map, y))
