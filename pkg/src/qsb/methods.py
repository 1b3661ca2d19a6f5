"""Uniform estimator wrappers over the metamodel modules, the per-method
hyperparameter boxes and tuning policies, and JSON model serialization.

Every estimator exposes ``fit(data, tau) -> self`` and
``predict(points) -> array``; constructors take hyperparameters plus
protocol settings.  Estimators needing randomness take an integer ``seed``
so that a fit is a deterministic function of (data, tau, hyperparameters,
seed) regardless of process or thread.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import forest, knn, nn, qk, rkhs, vb
from .core import empirical_quantile
from .data import Dataset, ReplicatedDataset
from .gp import Matern52
from .tuning import HyperBox, HyperParam

SCHEMA_VERSION = 1

METHOD_NAMES = ("const", "kn", "rf", "nn", "rk", "qk", "vb")


def derive_rng(base_seed: int, point: dict = None) -> np.random.Generator:
    """Deterministic generator from a base seed and a hyperparameter point.

    Non-numeric entries (e.g. a kernel object in an oracle candidate) are
    ignored, so candidates differing only in such entries share randomness.
    """
    words = [int(base_seed) & 0xFFFFFFFF]
    if point:
        for name in sorted(point):
            try:
                value = float(point[name])
            except (TypeError, ValueError):
                continue
            words.extend(
                int(w)
                for w in np.frombuffer(np.float64(value).tobytes(), dtype=np.uint32)
            )
            words.append(sum(ord(c) for c in name) & 0xFFFFFFFF)
    words = [w & 0xFFFFFFFF for w in words]
    return np.random.default_rng(np.random.SeedSequence(words))


class ConstantQuantileModel:
    """Predicts the training-sample quantile everywhere."""

    def __init__(self, seed: int = 0):
        self.q_ = None

    def fit(self, data, tau):
        y = data.flatten().y if isinstance(data, ReplicatedDataset) else data.y
        self.q_ = empirical_quantile(y, tau)
        return self

    def predict(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.full(pts.shape[0], self.q_)


class KnnRegressor:
    def __init__(self, k: int, seed: int = 0):
        self.k = int(k)
        self.model_ = None

    def fit(self, data: Dataset, tau: float):
        self.model_ = knn.knn_fit(data, tau, min(self.k, data.n))
        return self

    def predict(self, points):
        return knn.knn_predict_batch(self.model_, points)


class ForestRegressor:
    def __init__(
        self,
        max_leaf: int,
        n_trees: int = 10_000,
        d_tilde: int = None,
        seed: int = 0,
        bootstrap: bool = True,
    ):
        self.max_leaf = int(max_leaf)
        self.n_trees = int(n_trees)
        self.d_tilde = d_tilde
        self.seed = int(seed)
        self.bootstrap = bootstrap
        self.model_ = None

    def fit(self, data: Dataset, tau: float):
        self.model_ = forest.forest_fit(
            data,
            tau,
            max_leaf=min(self.max_leaf, data.n),
            n_trees=self.n_trees,
            d_tilde=self.d_tilde,
            rng=np.random.default_rng(self.seed),
            bootstrap=self.bootstrap,
        )
        return self

    def predict(self, points):
        return forest.forest_predict_batch(self.model_, points)


class NnRegressor:
    def __init__(
        self,
        lam: float,
        j1: int,
        n_multistart: int = 5,
        schedule=nn.DEFAULT_SCHEDULE,
        max_iter: int = 500,
        seed: int = 0,
    ):
        self.lam = float(lam)
        self.j1 = int(j1)
        self.n_multistart = int(n_multistart)
        self.schedule = schedule
        self.max_iter = int(max_iter)
        self.seed = int(seed)
        self.model_ = None

    def fit(self, data: Dataset, tau: float):
        self.model_ = nn.nn_train(
            data,
            tau,
            lam=self.lam,
            j1=self.j1,
            schedule=self.schedule,
            n_multistart=self.n_multistart,
            rng=np.random.default_rng(self.seed),
            max_iter=self.max_iter,
        )
        return self

    def predict(self, points):
        return nn.nn_forward(self.model_, points)


class RkhsRegressor:
    def __init__(self, lam: float, lengthscales, seed: int = 0):
        self.lam = float(lam)
        self.lengthscales = np.atleast_1d(np.asarray(lengthscales, dtype=float))
        self.model_ = None

    def fit(self, data: Dataset, tau: float):
        kernel = Matern52(1.0, self.lengthscales)
        self.model_ = rkhs.rkhs_fit(data, tau, self.lam, kernel)
        return self

    def predict(self, points):
        return rkhs.rkhs_predict(self.model_, points)


class QkRegressor:
    def __init__(
        self,
        n_boot: int = 200,
        n_start: int = None,
        seed: int = 0,
        fixed_kernel: Matern52 = None,
    ):
        self.n_boot = int(n_boot)
        self.n_start = n_start
        self.seed = int(seed)
        self.fixed_kernel = fixed_kernel
        self.model_ = None

    def fit(self, data: ReplicatedDataset, tau: float):
        if not isinstance(data, ReplicatedDataset):
            raise TypeError("quantile kriging requires a replicated design")
        self.model_ = qk.qk_fit(
            data,
            tau,
            n_boot=self.n_boot,
            rng=np.random.default_rng(self.seed),
            n_start=self.n_start,
            fixed_kernel=self.fixed_kernel,
        )
        return self

    def predict(self, points):
        return qk.qk_predict(self.model_, points).mean

    def predict_with_variance(self, points):
        post = qk.qk_predict(self.model_, points)
        return post.mean, post.variance


class VbRegressor:
    def __init__(
        self,
        n_it: int = 50,
        n_starts: int = None,
        m_step_starts: int = 5,
        seed: int = 0,
        fixed_kernel: Matern52 = None,
    ):
        self.n_it = int(n_it)
        self.n_starts = n_starts
        self.m_step_starts = int(m_step_starts)
        self.seed = int(seed)
        self.fixed_kernel = fixed_kernel
        self.model_ = None

    def fit(self, data: Dataset, tau: float):
        self.model_ = vb.vb_fit(
            data,
            tau,
            n_it=self.n_it,
            n_starts=self.n_starts,
            m_step_starts=self.m_step_starts,
            rng=np.random.default_rng(self.seed),
            fixed_kernel=self.fixed_kernel,
        )
        return self

    def predict(self, points):
        return vb.vb_predict(self.model_, points).mean

    def predict_with_variance(self, points):
        post = vb.vb_predict(self.model_, points)
        return post.mean, post.variance


@dataclass(frozen=True)
class MethodDef:
    name: str
    tuning: str  # "soo-cv" | "likelihood" | "none"
    needs_replicated: bool = False

    def hyper_box(self, data) -> HyperBox:
        n = data.n_bases if isinstance(data, ReplicatedDataset) else data.n
        span = data.domain[:, 1] - data.domain[:, 0]
        if self.name == "kn":
            return HyperBox([HyperParam("k", 1, n, "log", integer=True)])
        if self.name == "rf":
            return HyperBox([HyperParam("max_leaf", 1, n, "log", integer=True)])
        if self.name == "nn":
            return HyperBox(
                [
                    HyperParam("lam", 1e-6, 1.0, "log"),
                    HyperParam("j1", 1, 20, "linear", integer=True),
                ]
            )
        if self.name == "rk":
            params = [HyperParam("lam", 1e-6, 10.0, "log")]
            params += [
                HyperParam(f"theta{j + 1}", 1e-2 * span[j], 10.0 * span[j], "log")
                for j in range(span.size)
            ]
            return HyperBox(params)
        raise ValueError(f"{self.name} has no CV hyperparameter box")

    def soo_budget(self, d: int) -> int:
        if self.name == "rk":
            return 50 * (d + 1)
        return 100

    def factory(self, settings: dict = None, base_seed: int = 0):
        """callable(point_dict) -> fresh estimator, seeded per point."""
        settings = dict(settings or {})

        def build(point: dict):
            seed = int(derive_rng(base_seed, point).integers(0, 2**31 - 1))
            if self.name == "const":
                return ConstantQuantileModel()
            if self.name == "kn":
                return KnnRegressor(point["k"])
            if self.name == "rf":
                return ForestRegressor(
                    point["max_leaf"],
                    n_trees=settings.get("forest_trees", 10_000),
                    d_tilde=settings.get("forest_d_tilde"),
                    seed=seed,
                )
            if self.name == "nn":
                return NnRegressor(
                    point["lam"],
                    point["j1"],
                    n_multistart=settings.get("nn_multistarts", 5),
                    schedule=settings.get("nn_schedule", nn.DEFAULT_SCHEDULE),
                    max_iter=settings.get("nn_max_iter", 500),
                    seed=seed,
                )
            if self.name == "rk":
                thetas = [point[k] for k in sorted(point) if k.startswith("theta")]
                return RkhsRegressor(point["lam"], thetas)
            if self.name == "qk":
                kern = point.get("kernel") if point else None
                return QkRegressor(
                    n_boot=settings.get("qk_boot", 200),
                    n_start=settings.get("qk_ml_starts"),
                    seed=seed,
                    fixed_kernel=kern,
                )
            if self.name == "vb":
                kern = point.get("kernel") if point else None
                return VbRegressor(
                    n_it=settings.get("vb_iters", 50),
                    n_starts=settings.get("vb_em_starts"),
                    m_step_starts=settings.get("vb_mstep_starts", 5),
                    seed=seed,
                    fixed_kernel=kern,
                )
            raise ValueError(f"unknown method {self.name!r}")

        return build


_METHODS = {
    "const": MethodDef("const", "none"),
    "kn": MethodDef("kn", "soo-cv"),
    "rf": MethodDef("rf", "soo-cv"),
    "nn": MethodDef("nn", "soo-cv"),
    "rk": MethodDef("rk", "soo-cv"),
    "qk": MethodDef("qk", "likelihood", needs_replicated=True),
    "vb": MethodDef("vb", "likelihood"),
}


def get_method(name: str) -> MethodDef:
    try:
        return _METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {METHOD_NAMES}")


def _arr(a):
    return np.asarray(a).tolist()


def model_to_dict(method: str, fitted) -> dict:
    """JSON-serializable snapshot of a fitted estimator."""
    out = {"schema_version": SCHEMA_VERSION, "method": method}
    if method == "const":
        out["payload"] = {"q": fitted.q_}
    elif method == "kn":
        m = fitted.model_
        out["payload"] = {
            "x": _arr(m.x), "y": _arr(m.y), "tau": m.tau, "k": m.k,
        }
    elif method == "rf":
        m = fitted.model_
        out["payload"] = {
            "x": _arr(m.x), "y": _arr(m.y), "tau": m.tau,
            "max_leaf": m.max_leaf, "n_trees": m.n_trees, "d_tilde": m.d_tilde,
            "bootstrap": m.bootstrap,
            "node_feat": _arr(m.node_feat), "node_thr": _arr(m.node_thr),
            "node_left": _arr(m.node_left), "node_right": _arr(m.node_right),
            "node_start": _arr(m.node_start), "node_end": _arr(m.node_end),
            "tree_node_off": _arr(m.tree_node_off),
            "tree_work_off": _arr(m.tree_work_off),
            "work_all": _arr(m.work_all),
        }
    elif method == "nn":
        m = fitted.model_
        out["payload"] = {
            "w1": _arr(m.w1), "b1": _arr(m.b1), "w2": _arr(m.w2), "b2": m.b2,
            "x_mean": _arr(m.x_mean), "x_scale": _arr(m.x_scale), "tau": m.tau,
        }
    elif method == "rk":
        m = fitted.model_
        out["payload"] = {
            "x": _arr(m.x), "alpha": _arr(m.alpha), "b": m.b, "lam": m.lam,
            "tau": m.tau, "rho2": m.kernel.rho2,
            "lengthscales": _arr(m.kernel.lengthscales),
        }
    elif method == "qk":
        m = fitted.model_
        out["payload"] = {
            "bases": _arr(m.bases), "local_q": _arr(m.local_q),
            "noise_diag": _arr(m.noise_diag), "tau": m.tau,
            "rho2": m.kernel.rho2, "lengthscales": _arr(m.kernel.lengthscales),
        }
    elif method == "vb":
        m = fitted.model_
        out["payload"] = {
            "x": _arr(m.x), "tau": m.tau,
            "rho2": m.kernel.rho2, "lengthscales": _arr(m.kernel.lengthscales),
            "d_diag": _arr(m.state.d_diag), "v": _arr(m.state.v),
            "e_inv_w": _arr(m.state.e_inv_w), "a": m.state.a, "b": m.state.b,
            "elbo_trace": list(m.elbo_trace),
        }
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


def model_from_dict(d: dict):
    """Rebuild a fitted estimator from :func:`model_to_dict` output."""
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
    method = d["method"]
    p = d["payload"]
    if method == "const":
        est = ConstantQuantileModel()
        est.q_ = float(p["q"])
        return est
    if method == "kn":
        est = KnnRegressor(p["k"])
        est.model_ = knn.KnnModel(
            np.asarray(p["x"], dtype=float), np.asarray(p["y"], dtype=float),
            float(p["tau"]), int(p["k"]),
        )
        return est
    if method == "rf":
        est = ForestRegressor(p["max_leaf"], n_trees=p["n_trees"])
        y = np.asarray(p["y"], dtype=float)
        est.model_ = forest.ForestModel(
            x=np.asarray(p["x"], dtype=float),
            y=y,
            tau=float(p["tau"]),
            max_leaf=int(p["max_leaf"]),
            n_trees=int(p["n_trees"]),
            d_tilde=int(p["d_tilde"]),
            bootstrap=bool(p["bootstrap"]),
            node_feat=np.asarray(p["node_feat"], dtype=np.int32),
            node_thr=np.asarray(p["node_thr"], dtype=np.float64),
            node_left=np.asarray(p["node_left"], dtype=np.int32),
            node_right=np.asarray(p["node_right"], dtype=np.int32),
            node_start=np.asarray(p["node_start"], dtype=np.int32),
            node_end=np.asarray(p["node_end"], dtype=np.int32),
            tree_node_off=np.asarray(p["tree_node_off"], dtype=np.int64),
            tree_work_off=np.asarray(p["tree_work_off"], dtype=np.int64),
            work_all=np.asarray(p["work_all"], dtype=np.int32),
            y_order=np.argsort(y, kind="stable"),
        )
        return est
    if method == "nn":
        est = NnRegressor(0.0, len(p["w2"]))
        est.model_ = nn.MlpQuantileNet(
            np.asarray(p["w1"], dtype=float), np.asarray(p["b1"], dtype=float),
            np.asarray(p["w2"], dtype=float), float(p["b2"]),
            np.asarray(p["x_mean"], dtype=float),
            np.asarray(p["x_scale"], dtype=float), float(p["tau"]),
        )
        return est
    if method == "rk":
        est = RkhsRegressor(p["lam"], p["lengthscales"])
        est.model_ = rkhs.RkhsModel(
            np.asarray(p["x"], dtype=float), np.asarray(p["alpha"], dtype=float),
            float(p["b"]), Matern52(p["rho2"], p["lengthscales"]),
            float(p["lam"]), float(p["tau"]),
        )
        return est
    if method == "qk":
        est = QkRegressor()
        est.model_ = qk.QkModel(
            np.asarray(p["bases"], dtype=float),
            np.asarray(p["local_q"], dtype=float),
            np.asarray(p["noise_diag"], dtype=float),
            Matern52(p["rho2"], p["lengthscales"]), float(p["tau"]),
        )
        return est
    if method == "vb":
        est = VbRegressor()
        x = np.asarray(p["x"], dtype=float)
        kernel = Matern52(p["rho2"], p["lengthscales"])
        d_diag = np.asarray(p["d_diag"], dtype=float)
        v = np.asarray(p["v"], dtype=float)
        K, L, z, mu, V = vb._posterior_solves(kernel, x, d_diag, v)
        Sigma = K - V.T @ V
        state = vb.VbState(
            mu, 0.5 * (Sigma + Sigma.T),
            np.asarray(p["e_inv_w"], dtype=float), float(p["a"]), float(p["b"]),
            d_diag=d_diag, v=v, z=z,
        )
        est.model_ = vb.VbModel(
            x, float(p["tau"]), kernel, state, L, tuple(p["elbo_trace"])
        )
        return est
    raise ValueError(f"unknown method {method!r}")
