"""Minimal complex-valued layered network with hard and relaxed execution.

Hard mode reproduces exact gate semantics and is bit-for-bit deterministic:
every neuron's pre-activation accumulates its (sparse) weighted inputs
strictly left-to-right in ascending column order, then adds the bias.  The
propagation simulator sums incoming weights in the same order, which is why
threshold and comparison decisions agree between the two.

Relaxed mode replaces each gate's indicator with a logistic ramp of
temperature tau applied to the same comparison margin, leaving the passed
value's formula unchanged.  Gradients treat every complex value as a pair
of reals; a complex array `g` carries the cotangents of the real parts in
`g.real` and of the imaginary parts in `g.imag`.

Gate semantics (hard):
  identity          a = z
  threshold(theta)  a = z            if Re(z) >= theta    else 0
  compare           a = (Im z, Re z) if Im(z) >= 0        else 0
  index(k)          a = 1+0j         if Im(z) >= k - 1/2  else 0
  one_hot(l)        a = 1+0j         if Re(z) > l         else 0

Relaxed counterparts scale by sigmoid(tau * margin) with margins
Re(z)-theta, Im(z), Im(z)-(k-1/2) and Re(z)-l: each relaxed gate ramps
around its hard gate's own boundary, so the hard output is recovered as
tau -> infinity at every input whose comparison quantity is off the
boundary.  On integer-valued channels the index gate's half-unit slack is
invisible to hard semantics but keeps the compiled networks' operating
points half a unit away from every ramp center.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .exceptions import DimensionError, GraphFormatError, ModeError, NumericError

HARD = "hard"
RELAXED = "relaxed"

IDENTITY, THRESHOLD, COMPARE, INDEX, ONEHOT = range(5)
_KIND_NAMES = ("identity", "threshold", "compare", "index", "one_hot")
_KIND_CODES = {name: code for code, name in enumerate(_KIND_NAMES)}


@dataclass(frozen=True)
class ActivationKind:
    """Per-neuron activation: a kind tag plus one real parameter."""

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if not np.isfinite(self.param):
            raise ValueError("activation parameter must be finite")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def threshold(cls, theta: float):
        return cls("threshold", float(theta))

    @classmethod
    def compare(cls):
        return cls("compare")

    @classmethod
    def index(cls, k: int):
        return cls("index", float(k))

    @classmethod
    def one_hot(cls, level: float):
        return cls("one_hot", float(level))


class LayerSpec:
    """One layer: sparse complex weight (out_dim x in_dim), complex bias,
    and one ActivationKind per output neuron."""

    def __init__(self, weight, bias, activations):
        if sp.issparse(weight):
            w = weight.tocsr().astype(np.complex128)
        else:
            w = sp.csr_matrix(np.asarray(weight, dtype=np.complex128))
        # explicit zeros are kept: they are exact no-ops in the ordered
        # accumulation and may be bound (trainable) entries
        w.sort_indices()
        self.weight = w
        self.bias = np.asarray(bias, dtype=np.complex128).reshape(-1)
        self.activations = tuple(activations)
        out_dim, in_dim = w.shape
        if self.bias.size != out_dim or len(self.activations) != out_dim:
            raise DimensionError("bias / activations length must equal out_dim")
        if not np.all(np.isfinite(w.data)) or not np.all(np.isfinite(self.bias)):
            raise ValueError("layer weights and bias must be finite")
        self.out_dim, self.in_dim = out_dim, in_dim
        self._codes = np.array([_KIND_CODES[a.kind] for a in self.activations],
                               dtype=np.int8)
        self._params = np.array([a.param for a in self.activations], dtype=np.float64)
        self._kind_rows = {
            code: np.nonzero(self._codes == code)[0]
            for code in range(5) if np.any(self._codes == code)
        }
        # position-ordered structures for the sequential hard accumulation
        nnz = np.diff(w.indptr)
        positions = []
        for p in range(int(nnz.max()) if nnz.size else 0):
            rows = np.nonzero(nnz > p)[0]
            idx = w.indptr[rows] + p
            positions.append((rows, w.indices[idx], w.data[idx]))
        self._positions = positions
        self._adjoint = None  # conjugate transpose, built on first backward

    def adjoint(self) -> sp.csr_matrix:
        if self._adjoint is None:
            self._adjoint = self.weight.conjugate().T.tocsr()
        return self._adjoint

    def replace(self, weight_data=None, act_params=None) -> "LayerSpec":
        """Copy with updated CSR data and/or activation parameters."""
        w = self.weight.copy()
        if weight_data is not None:
            w.data = np.asarray(weight_data, dtype=np.complex128)
        params = self._params if act_params is None else np.asarray(act_params)
        acts = [ActivationKind(_KIND_NAMES[c], float(p))
                for c, p in zip(self._codes, params)]
        return LayerSpec(w, self.bias.copy(), acts)

    # -- execution ---------------------------------------------------------

    def pre_activation_hard(self, h: np.ndarray) -> np.ndarray:
        z = np.zeros((self.out_dim, h.shape[1]), dtype=np.complex128)
        for rows, cols, data in self._positions:
            z[rows] += data[:, None] * h[cols]
        z += self.bias[:, None]
        return z

    def pre_activation_relaxed(self, h: np.ndarray) -> np.ndarray:
        return self.weight @ h + self.bias[:, None]

    def activate_hard(self, z: np.ndarray) -> np.ndarray:
        a = np.empty_like(z)
        for code, rows in self._kind_rows.items():
            zz = z[rows]
            if code == IDENTITY:
                a[rows] = zz
            elif code == THRESHOLD:
                a[rows] = zz * (zz.real >= self._params[rows, None])
            elif code == COMPARE:
                a[rows] = (zz.imag + 1j * zz.real) * (zz.imag >= 0.0)
            elif code == INDEX:
                a[rows] = (zz.imag >= self._params[rows, None] - 0.5).astype(np.complex128)
            else:  # ONEHOT
                a[rows] = (zz.real > self._params[rows, None]).astype(np.complex128)
        return a

    def activate_relaxed(self, z: np.ndarray, tau: float) -> np.ndarray:
        a = np.empty_like(z)
        for code, rows in self._kind_rows.items():
            zz = z[rows]
            p = self._params[rows, None]
            if code == IDENTITY:
                a[rows] = zz
            elif code == THRESHOLD:
                a[rows] = zz * expit(tau * (zz.real - p))
            elif code == COMPARE:
                a[rows] = (zz.imag + 1j * zz.real) * expit(tau * zz.imag)
            elif code == INDEX:
                a[rows] = expit(tau * (zz.imag - (p - 0.5))).astype(np.complex128)
            else:  # ONEHOT
                a[rows] = expit(tau * (zz.real - p)).astype(np.complex128)
        return a

    def backward_activation(self, z: np.ndarray, ga: np.ndarray, tau: float):
        """Cotangent through the relaxed gates.

        Returns (gz, gtheta) where gtheta holds per-neuron cotangents of the
        threshold parameters (zeros elsewhere), summed over the batch.
        """
        gz = np.zeros_like(ga)
        gtheta = np.zeros(self.out_dim)
        for code, rows in self._kind_rows.items():
            zz = z[rows]
            g = ga[rows]
            p = self._params[rows, None]
            if code == IDENTITY:
                gz[rows] = g
            elif code == THRESHOLD:
                s = expit(tau * (zz.real - p))
                d = tau * s * (1.0 - s)
                common = g.real * zz.real + g.imag * zz.imag
                gz[rows] = (g.real * s + common * d) + 1j * (g.imag * s)
                gtheta[rows] = -(common * d).sum(axis=1)
            elif code == COMPARE:
                s = expit(tau * zz.imag)
                d = tau * s * (1.0 - s)
                gz[rows] = (g.imag * s) + 1j * (
                    g.real * (s + zz.imag * d) + g.imag * (zz.real * d)
                )
            elif code == INDEX:
                s = expit(tau * (zz.imag - (p - 0.5)))
                gz[rows] = 1j * (g.real * tau * s * (1.0 - s))
            else:  # ONEHOT
                s = expit(tau * (zz.real - p))
                gz[rows] = g.real * tau * s * (1.0 - s) + 0j
        return gz, gtheta


class BindingTable:
    """Maps named trainable parameters to the positions where they appear.

    A parameter may be bound to real parts of weight entries
    (layer, row, col) and/or to threshold-gate parameters (layer, neuron),
    at any number of sites; layer indices refer to the block's layer list,
    so a repeated block binds every repetition automatically.
    """

    def __init__(self, names, weight_sites=(), theta_sites=()):
        self.names = tuple(names)
        ws = np.array(sorted(weight_sites, key=lambda s: s[1]), dtype=np.int64)
        ts = np.array(sorted(theta_sites, key=lambda s: s[1]), dtype=np.int64)
        self._weight_sites = ws.reshape(-1, 4)   # (param, layer, row, col)
        self._theta_sites = ts.reshape(-1, 3)    # (param, layer, neuron)
        for arr, col in ((self._weight_sites, 0), (self._theta_sites, 0)):
            if arr.size and (arr[:, col].min() < 0 or arr[:, col].max() >= len(self.names)):
                raise ValueError("binding site references unknown parameter")
        self._ws_by_layer = {
            li: self._weight_sites[self._weight_sites[:, 1] == li]
            for li in np.unique(self._weight_sites[:, 1])
        } if self._weight_sites.size else {}
        self._ts_by_layer = {
            li: self._theta_sites[self._theta_sites[:, 1] == li]
            for li in np.unique(self._theta_sites[:, 1])
        } if self._theta_sites.size else {}
        self._empty_ws = np.empty((0, 4), dtype=np.int64)
        self._empty_ts = np.empty((0, 3), dtype=np.int64)

    @property
    def n_params(self) -> int:
        return len(self.names)

    def weight_sites_for_layer(self, layer_idx: int) -> np.ndarray:
        return self._ws_by_layer.get(layer_idx, self._empty_ws)

    def theta_sites_for_layer(self, layer_idx: int) -> np.ndarray:
        return self._ts_by_layer.get(layer_idx, self._empty_ts)

    def all_weight_sites(self) -> np.ndarray:
        return self._weight_sites

    def all_theta_sites(self) -> np.ndarray:
        return self._theta_sites


class NetworkSpec:
    """Ordered layers, optionally repeated (a repeated block shares its
    parameters across repetitions), plus the parameter binding table."""

    def __init__(self, layers, repeat: int = 1, bindings: BindingTable | None = None):
        self.layers = tuple(layers)
        self.repeat = int(repeat)
        self.bindings = bindings
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise DimensionError("adjacent layer dimensions do not chain")
        if self.repeat > 1 and self.layers[-1].out_dim != self.layers[0].in_dim:
            raise DimensionError("repeated block must map a space to itself")
        self.input_dim = self.layers[0].in_dim
        self.output_dim = self.layers[-1].out_dim

    @property
    def n_applications(self) -> int:
        return self.repeat * len(self.layers)

    @property
    def layer_count(self) -> int:
        """Node-layer count in the construction's convention: each
        repetition contributes its input layer plus one layer per mapping."""
        return self.repeat * (len(self.layers) + 1)

    def application(self, i: int) -> LayerSpec:
        return self.layers[i % len(self.layers)]

    # -- parameters ----------------------------------------------------------

    def parameter_values(self) -> np.ndarray:
        """Current value of every bound parameter (first site read wins;
        construction guarantees all sites agree)."""
        if self.bindings is None:
            raise ValueError("network has no parameter bindings")
        vals = np.full(self.bindings.n_params, np.nan)
        ws = self.bindings.all_weight_sites()
        for pidx, layer_idx, row, col in ws[::-1]:
            vals[pidx] = self.layers[layer_idx].weight[row, col].real
        ts = self.bindings.all_theta_sites()
        for pidx, layer_idx, neuron in ts[::-1]:
            vals[pidx] = self.layers[layer_idx]._params[neuron]
        return vals

    def with_parameters(self, values) -> "NetworkSpec":
        """New network with every bound site set from `values` (aligned with
        bindings.names).  Unbound entries are untouched."""
        if self.bindings is None:
            raise ValueError("network has no parameter bindings")
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.bindings.n_params,):
            raise DimensionError(f"expected {self.bindings.n_params} parameter values")
        new_layers = []
        for li, layer in enumerate(self.layers):
            ws = self.bindings.weight_sites_for_layer(li)
            ts = self.bindings.theta_sites_for_layer(li)
            if not ws.size and not ts.size:
                new_layers.append(layer)
                continue
            data = layer.weight.data.copy()
            if ws.size:
                csr = layer.weight
                for pidx, _, row, col in ws:
                    lo, hi = csr.indptr[row], csr.indptr[row + 1]
                    pos = lo + np.searchsorted(csr.indices[lo:hi], col)
                    if pos >= hi or csr.indices[pos] != col:
                        raise ValueError("bound weight site is not a stored entry")
                    data[pos] = values[pidx] + 1j * data[pos].imag
            act_params = layer._params.copy()
            if ts.size:
                act_params[ts[:, 2]] = values[ts[:, 0]]
            new_layers.append(layer.replace(weight_data=data, act_params=act_params))
        return NetworkSpec(new_layers, repeat=self.repeat, bindings=self.bindings)


class ForwardTrace:
    """Per-application pre-activations plus everything needed to replay the
    gates; post-activations are recomputed on demand."""

    def __init__(self, net: NetworkSpec, x: np.ndarray, mode: str, tau, pre,
                 applications_run: int):
        self.net = net
        self.input = x
        self.mode = mode
        self.tau = tau
        self.pre = pre
        self.applications_run = applications_run

    def post(self, i: int) -> np.ndarray:
        layer = self.net.application(i)
        if self.mode == HARD:
            return layer.activate_hard(self.pre[i])
        return layer.activate_relaxed(self.pre[i], self.tau)

    def layer_input(self, i: int) -> np.ndarray:
        return self.input if i == 0 else self.post(i - 1)


def forward(net: NetworkSpec, x, mode: str = HARD, tau: float | None = None,
            early_exit: bool = False, keep_trace: bool = True):
    """Run the network; returns (output, trace).

    `x` may be a vector (input_dim,) or a batch (input_dim, n_samples); the
    output matches.  In relaxed mode `tau` must be a positive temperature.
    `early_exit` (hard mode) stops repeating the block once its output
    equals its input, with identical results guaranteed.
    """
    if mode not in (HARD, RELAXED):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == RELAXED:
        if tau is None or not tau > 0:
            raise ValueError("relaxed mode needs tau > 0")
        if early_exit:
            raise ValueError("early_exit applies to hard mode only")
    x = np.asarray(x, dtype=np.complex128)
    squeeze = x.ndim == 1
    h = x.reshape(-1, 1) if squeeze else x
    if h.shape[0] != net.input_dim:
        raise DimensionError(f"input dim {h.shape[0]} != network input {net.input_dim}")
    pre = [] if keep_trace else None
    n_layers = len(net.layers)
    applications = 0
    for rep in range(net.repeat):
        block_in = h
        for li, layer in enumerate(net.layers):
            with np.errstate(over="ignore", invalid="ignore"):
                if mode == HARD:
                    z = layer.pre_activation_hard(h)
                    a = layer.activate_hard(z)
                else:
                    z = layer.pre_activation_relaxed(h)
                    a = layer.activate_relaxed(z, tau)
            if not np.all(np.isfinite(z)):
                raise NumericError(
                    f"non-finite pre-activation at layer {rep * n_layers + li}"
                )
            if keep_trace:
                pre.append(z)
            h = a
            applications += 1
        if early_exit and mode == HARD and rep + 1 < net.repeat:
            if np.array_equal(h, block_in):
                break
    out = h[:, 0] if squeeze else h
    trace = None
    if keep_trace:
        trace = ForwardTrace(net, x.reshape(-1, 1) if squeeze else x, mode, tau,
                             pre, applications)
    return out, trace


def backward(net: NetworkSpec, trace: ForwardTrace, output_grad) -> np.ndarray:
    """Cotangents of every bound parameter, given the cotangent of the output.

    `output_grad` is complex-valued with the same shape as the forward
    output: its real part holds d(loss)/d(Re out), its imaginary part
    d(loss)/d(Im out).  Parameters bound at several sites (including every
    repetition of a repeated block) receive the sum of their site gradients.
    """
    if trace.mode != RELAXED:
        raise ModeError("backward needs a relaxed-mode trace (hard gates are flat)")
    if net.bindings is None:
        raise ValueError("network has no parameter bindings")
    if trace.applications_run != net.n_applications:
        raise ValueError("trace does not cover the full network")
    g = np.asarray(output_grad, dtype=np.complex128)
    if g.ndim == 1:
        g = g.reshape(-1, 1)
    if g.shape != trace.pre[-1].shape:
        raise DimensionError("output_grad shape does not match the traced output")
    grads = np.zeros(net.bindings.n_params)
    n_layers = len(net.layers)
    ga = g
    for i in range(net.n_applications - 1, -1, -1):
        layer = net.application(i)
        li = i % n_layers
        z = trace.pre[i]
        gz, gtheta = layer.backward_activation(z, ga, trace.tau)
        ts = net.bindings.theta_sites_for_layer(li)
        if ts.size:
            np.add.at(grads, ts[:, 0], gtheta[ts[:, 2]])
        ws = net.bindings.weight_sites_for_layer(li)
        if ws.size:
            h_in = trace.layer_input(i)
            contrib = (gz[ws[:, 2]] * np.conj(h_in[ws[:, 3]])).real.sum(axis=1)
            np.add.at(grads, ws[:, 0], contrib)
        if i > 0:
            ga = layer.adjoint() @ gz
    return grads


def quadratic_loss(output: np.ndarray):
    """0.5 * sum of squared real and imaginary parts, with its cotangent."""
    value = 0.5 * float((output.real ** 2 + output.imag ** 2).sum())
    return value, output.copy()


def finite_diff_check(net: NetworkSpec, x, loss_fn=None, tau: float = 5.0,
                      step: float = 1e-5, eps: float = 1e-8) -> float:
    """Max over bound parameters of |analytic - numeric| / (|numeric| + eps).

    `loss_fn(output) -> (value, cotangent_wrt_output)`; defaults to the
    quadratic loss above.  Central differences with the given step.
    """
    if loss_fn is None:
        loss_fn = quadratic_loss
    out, trace = forward(net, x, mode=RELAXED, tau=tau)
    _, gout = loss_fn(out)
    analytic = backward(net, trace, gout)
    values = net.parameter_values()
    worst = 0.0
    for j in range(values.size):
        for sign in (+1.0, -1.0):
            shifted = values.copy()
            shifted[j] += sign * step
            out_s, _ = forward(net.with_parameters(shifted), x, mode=RELAXED,
                               tau=tau, keep_trace=False)
            if sign > 0:
                f_plus = loss_fn(out_s)[0]
            else:
                f_minus = loss_fn(out_s)[0]
        numeric = (f_plus - f_minus) / (2.0 * step)
        err = abs(analytic[j] - numeric) / (abs(numeric) + eps)
        worst = max(worst, err)
    return worst


# -- checkpoint io -----------------------------------------------------------

CHECKPOINT_FORMAT = "cvnn-checkpoint"
CHECKPOINT_VERSION = 1


def save_network(net: NetworkSpec, path) -> None:
    layers = []
    for layer in net.layers:
        coo = layer.weight.tocoo()
        layers.append({
            "out_dim": layer.out_dim,
            "in_dim": layer.in_dim,
            "rows": coo.row.tolist(),
            "cols": coo.col.tolist(),
            "w_re": coo.data.real.tolist(),
            "w_im": coo.data.imag.tolist(),
            "bias_re": layer.bias.real.tolist(),
            "bias_im": layer.bias.imag.tolist(),
            "act_kinds": [a.kind for a in layer.activations],
            "act_params": [a.param for a in layer.activations],
        })
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "repeat": net.repeat,
        "layers": layers,
        "bindings": None if net.bindings is None else {
            "names": list(net.bindings.names),
            "weight_sites": net.bindings.all_weight_sites().tolist(),
            "theta_sites": net.bindings.all_theta_sites().tolist(),
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, allow_nan=False)


def load_network(path) -> NetworkSpec:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise GraphFormatError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise GraphFormatError(f"{path}: unknown checkpoint version")
    layers = []
    for rec in doc["layers"]:
        data = np.array(rec["w_re"], dtype=np.float64) + 1j * np.array(rec["w_im"])
        w = sp.coo_matrix((data, (rec["rows"], rec["cols"])),
                          shape=(rec["out_dim"], rec["in_dim"])).tocsr()
        bias = np.array(rec["bias_re"]) + 1j * np.array(rec["bias_im"])
        acts = [ActivationKind(k, p) for k, p in zip(rec["act_kinds"], rec["act_params"])]
        layers.append(LayerSpec(w, bias, acts))
    bindings = None
    if doc.get("bindings"):
        b = doc["bindings"]
        bindings = BindingTable(b["names"],
                                weight_sites=[tuple(s) for s in b["weight_sites"]],
                                theta_sites=[tuple(s) for s in b["theta_sites"]])
    return NetworkSpec(layers, repeat=doc["repeat"], bindings=bindings)
