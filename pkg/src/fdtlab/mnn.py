"""Multi-layer spectral convolutional network and its exact gradient.

Each layer applies a bank of polynomial spectral filters (one per
input/output feature pair) followed by a pointwise 1-Lipschitz
nonlinearity with sigma(0) = 0. Filters run through the precomputed
eigendecomposition, which lets threshold-constrained (FDT) filters share
the same application path via per-eigenvalue response tensors.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputValidationError
from .spectral_core import EigenSystem
from .spectrum_partition import SpectrumPartition

_ACTIVATIONS = {
    "relu": (lambda x: np.maximum(x, 0.0), lambda x: (x > 0).astype(float)),
    "abs": (np.abs, np.sign),
    "tanh": (np.tanh, lambda x: 1.0 - np.tanh(x) ** 2),
}


def activation_apply(kind: str, x):
    """Pointwise nonlinearity; all kinds are 1-Lipschitz with sigma(0) = 0.

    Subgradient convention at the relu/abs kink: derivative 0 at exactly 0.
    """
    if kind not in _ACTIVATIONS:
        raise InputValidationError(f"unknown activation {kind!r}; choose from {sorted(_ACTIVATIONS)}")
    return _ACTIVATIONS[kind][0](np.asarray(x, dtype=float))


def activation_derivative(kind: str, x):
    if kind not in _ACTIVATIONS:
        raise InputValidationError(f"unknown activation {kind!r}; choose from {sorted(_ACTIVATIONS)}")
    return _ACTIVATIONS[kind][1](np.asarray(x, dtype=float))


@dataclass(frozen=True)
class MnnParams:
    """Network shape and filter coefficients.

    features holds (F_0, ..., F_L); coeffs[l] has shape (F_{l+1}, F_l, K)
    with coeffs[l][p][q] the taps of the filter mapping input feature q to
    output feature p of layer l+1.
    """

    features: tuple[int, ...]
    taps: int
    coeffs: tuple[np.ndarray, ...]
    activation: str = "relu"

    @property
    def num_layers(self) -> int:
        return len(self.features) - 1

    def __post_init__(self):
        if len(self.features) < 2 or any(f < 1 for f in self.features):
            raise InputValidationError("features must list F_0..F_L with every F >= 1")
        if self.taps < 1:
            raise InputValidationError("taps must be >= 1")
        if self.activation not in _ACTIVATIONS:
            raise InputValidationError(f"unknown activation {self.activation!r}")
        if len(self.coeffs) != self.num_layers:
            raise InputValidationError(
                f"expected {self.num_layers} coefficient tensors, got {len(self.coeffs)}"
            )
        coeffs = tuple(np.asarray(c, dtype=float) for c in self.coeffs)
        for layer, c in enumerate(coeffs):
            want = (self.features[layer + 1], self.features[layer], self.taps)
            if c.shape != want:
                raise InputValidationError(
                    f"layer {layer} coefficients have shape {c.shape}, expected {want}"
                )
            if not np.all(np.isfinite(c)):
                raise InputValidationError(f"layer {layer} coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "features", tuple(int(f) for f in self.features))


def init_mnn_params(features, taps, activation="relu", seed=0) -> MnnParams:
    """Seeded i.i.d. uniform init on [-1/(K*F_in), 1/(K*F_in)] per layer.

    Keeps initial responses small, hence non-amplifying with high
    probability on desk-scale spectra.
    """
    features = tuple(int(f) for f in features)
    rng = np.random.default_rng(seed)
    coeffs = []
    for layer in range(len(features) - 1):
        bound = 1.0 / (taps * features[layer])
        shape = (features[layer + 1], features[layer], taps)
        coeffs.append(rng.uniform(-bound, bound, size=shape))
    return MnnParams(features=features, taps=taps, coeffs=tuple(coeffs), activation=activation)


def _powers(eigenvalues: np.ndarray, taps: int) -> np.ndarray:
    return np.vander(eigenvalues, taps, increasing=True)


def response_tensors(params: MnnParams, eigenvalues) -> list[np.ndarray]:
    """Per-layer response tensors R[l][p, q, i] = h_l^{pq}(lambda_i)."""
    lam = np.asarray(eigenvalues, dtype=float)
    v = _powers(lam, params.taps)
    return [np.tensordot(c, v, axes=([2], [1])) for c in params.coeffs]


def fdt_response_tensors(
    params: MnnParams,
    partition: SpectrumPartition,
    base_eigenvalues,
    eval_eigenvalues=None,
) -> list[np.ndarray]:
    """Response tensors with each filter constrained to the FDT structure.

    Group gains are the filter polynomial evaluated at the midpoint of the
    group's interval in the base spectrum; singleton gains are evaluated at
    the corresponding (by index) eigenvalue of the evaluation spectrum,
    which defaults to the base one. Passing a perturbed spectrum realizes
    the same filter bank on the perturbed operator with the index structure
    inherited from the base partition.
    """
    base = np.asarray(base_eigenvalues, dtype=float)
    lam = base if eval_eigenvalues is None else np.asarray(eval_eigenvalues, dtype=float)
    if partition.size != base.size or partition.size != lam.size:
        raise InputValidationError("partition and eigenvalue vectors must agree in length")
    mids = np.array([(base[g[0]] + base[g[-1]]) / 2.0 for g in partition.groups])
    v = _powers(lam, params.taps)
    v_mid = _powers(mids, params.taps) if mids.size else np.zeros((0, params.taps))
    out = []
    for c in params.coeffs:
        r = np.tensordot(c, v, axes=([2], [1]))
        if mids.size:
            r_mid = np.tensordot(c, v_mid, axes=([2], [1]))
            for g_idx, members in enumerate(partition.groups):
                r[:, :, list(members)] = r_mid[:, :, g_idx][:, :, None]
        out.append(r)
    return out


def _as_features(x, f0: int, n: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape != (n, f0):
        raise InputValidationError(f"input shape {np.shape(x)} does not match (n={n}, F_0={f0})")
    return arr


def forward_responses(responses, activation: str, eig: EigenSystem, x) -> np.ndarray:
    """Forward pass from explicit per-layer response tensors."""
    feats = _as_features(x, responses[0].shape[1], eig.n)
    for r in responses:
        zhat = np.einsum("pqi,iq->ip", r, eig.eigenvectors.T @ feats)
        feats = activation_apply(activation, eig.eigenvectors @ zhat)
    return feats


def forward(params: MnnParams, eig: EigenSystem, x, keep_state: bool = False):
    """Layerwise forward pass f_l = sigma(sum_q h^{pq}(L) f_{l-1}^q).

    Returns the (n, F_L) output, or (output, state) when keep_state is
    set; the state retains what gradient() needs.
    """
    feats = _as_features(x, params.features[0], eig.n)
    v = _powers(eig.eigenvalues, params.taps)
    state = {"inputs_hat": [], "pre_acts": [], "powers": v}
    out = feats
    for c in params.coeffs:
        r = np.tensordot(c, v, axes=([2], [1]))
        xhat = eig.eigenvectors.T @ out
        z = eig.eigenvectors @ np.einsum("pqi,iq->ip", r, xhat)
        if keep_state:
            state["inputs_hat"].append(xhat)
            state["pre_acts"].append(z)
        out = activation_apply(params.activation, z)
    return (out, state) if keep_state else out


def gradient(params: MnnParams, eig: EigenSystem, state, loss_grad) -> list[np.ndarray]:
    """Reverse-mode gradient of a scalar loss w.r.t. every filter coefficient.

    loss_grad is dLoss/d(output), shape (n, F_L) or (n,) when F_L = 1. The
    coefficient gradient uses the adjoint of the spectral filter: for tap k,
    d<loss>/dh_k = <back-signal, Phi diag(lambda^k) Phi^T input>, evaluated
    in the spectral domain. Requires the state from forward(keep_state=True).
    """
    if not state or not state.get("inputs_hat"):
        raise InputValidationError("gradient requires the retained state of a forward pass")
    if len(state["inputs_hat"]) != params.num_layers:
        raise InputValidationError("retained state does not match the network depth")
    g = _as_features(loss_grad, params.features[-1], eig.n)
    v = state["powers"]
    grads = [np.zeros_like(c) for c in params.coeffs]
    for layer in range(params.num_layers - 1, -1, -1):
        gz = g * activation_derivative(params.activation, state["pre_acts"][layer])
        ghat = eig.eigenvectors.T @ gz
        xhat = state["inputs_hat"][layer]
        grads[layer] = np.einsum("ik,ip,iq->pqk", v, ghat, xhat)
        if layer > 0:
            r = np.tensordot(params.coeffs[layer], v, axes=([2], [1]))
            g = eig.eigenvectors @ np.einsum("pqi,ip->iq", r, ghat)
    return grads


def cap_responses(params: MnnParams, lam_range, cap: float, samples: int = 2001) -> MnnParams:
    """Rescale each filter whose peak response magnitude on lam_range exceeds cap.

    Scaling coefficients scales the response linearly, so the returned
    filters satisfy |h| <= cap on the given interval (up to grid sampling).
    """
    if not cap > 0:
        raise InputValidationError("cap must be positive")
    xs = np.linspace(float(lam_range[0]), float(lam_range[1]), samples)
    v = _powers(xs, params.taps)
    coeffs = []
    for c in params.coeffs:
        resp = np.tensordot(c, v, axes=([2], [1]))
        peaks = np.max(np.abs(resp), axis=2)
        scale = np.where(peaks > cap, cap / np.maximum(peaks, 1e-300), 1.0)
        coeffs.append(c * scale[:, :, None])
    return MnnParams(
        features=params.features, taps=params.taps, coeffs=tuple(coeffs),
        activation=params.activation,
    )


def scale_to_nonamplifying(params: MnnParams, lam_range, margin: float = 0.9) -> MnnParams:
    """Rescale filters so every response magnitude stays <= margin < 1 on lam_range."""
    if not (0 < margin < 1):
        raise InputValidationError("margin must lie in (0, 1)")
    return cap_responses(params, lam_range, margin)


def params_to_json(params: MnnParams) -> str:
    doc = {
        "layers": params.num_layers,
        "features": list(params.features),
        "taps": params.taps,
        "activation": params.activation,
        "coeffs": [c.tolist() for c in params.coeffs],
    }
    return json.dumps(doc, sort_keys=True)


def params_from_json(text: str) -> MnnParams:
    doc = json.loads(text)
    allowed = {"layers", "features", "taps", "activation", "coeffs"}
    unknown = set(doc) - allowed
    if unknown:
        raise InputValidationError(f"unknown fields in network params: {sorted(unknown)}")
    try:
        params = MnnParams(
            features=tuple(doc["features"]),
            taps=int(doc["taps"]),
            coeffs=tuple(np.asarray(c, dtype=float) for c in doc["coeffs"]),
            activation=doc.get("activation", "relu"),
        )
    except KeyError as exc:
        raise InputValidationError(f"missing field in network params: {exc}") from exc
    if "layers" in doc and int(doc["layers"]) != params.num_layers:
        raise InputValidationError(
            f"declared layers {doc['layers']} != len(features)-1 = {params.num_layers}"
        )
    return params
