"""Reference forecasters for the close series: ARIMA and epsilon-SVR.

ARIMA is fitted by conditional sum of squares: the series is differenced
d times, the first p values condition the recursion, pre-sample residuals
are zero, and AR/MA coefficients minimize the one-step squared residuals
via damped Gauss-Newton steps with analytically recursed Jacobians. An
intercept is included only when d = 0, which keeps two identities exact:
(0,0,0) forecasts the training mean and (0,1,0) forecasts the last value.

SVR solves the standard 2l-variable epsilon-insensitive dual by SMO with
maximal-violating-pair selection, LIBSVM-style.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonConvergence, TooShort
from .ingest import DOWN, UP

ARIMA_P_GRID = (0, 1, 2, 3)
ARIMA_D_GRID = (0, 1, 2)
ARIMA_Q_GRID = (0, 1, 2, 3)
ARIMA_MAX_ITER = 500
ARIMA_TOL = 1e-8
MIN_ARIMA_ROWS = 50

SVR_C_GRID = (0.1, 1.0, 10.0, 100.0)
SVR_EPSILON_GRID = (0.01, 0.1)
SVR_GAMMA_GRID = (0.01, 0.1, 1.0)
SVR_KKT_TOL = 1e-3
SVR_MAX_ITER = 10_000
MIN_SVR_ROWS = 30
SVR_LAGS = 5


# -- ARIMA -------------------------------------------------------------------

@dataclass(frozen=True)
class ArimaModel:
    order: tuple[int, int, int]
    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    intercept: float
    sigma2: float
    aic: float
    sse: float
    w_tail: tuple[float, ...]  # last max(p,q) differenced observations
    e_tail: tuple[float, ...]  # last max(p,q) residuals
    diff_tails: tuple[float, ...]  # last value at diff levels 0..d-1


def difference(series, d: int) -> np.ndarray:
    w = np.asarray(series, dtype=float)
    for _ in range(d):
        w = np.diff(w)
    return w


def _css_pass(w, ar, ma, intercept, with_jacobian: bool):
    """Residuals (and optionally their parameter Jacobian) over t >= p.

    Pre-sample residuals and derivatives are zero; the intercept column is
    present only when `intercept` is not None.
    """
    n, p, q = len(w), len(ar), len(ma)
    has_c = intercept is not None
    e = np.zeros(n)
    cols = (1 if has_c else 0) + p + q
    jac = np.zeros((n, cols)) if with_jacobian else None
    for t in range(p, n):
        pred = intercept if has_c else 0.0
        for i in range(p):
            pred += ar[i] * w[t - 1 - i]
        for j in range(q):
            if t - 1 - j >= 0:
                pred += ma[j] * e[t - 1 - j]
        e[t] = w[t] - pred
        if not with_jacobian:
            continue
        col = 0
        if has_c:
            acc = -1.0
            for j in range(q):
                if t - 1 - j >= 0:
                    acc -= ma[j] * jac[t - 1 - j, col]
            jac[t, col] = acc
            col += 1
        for i in range(p):
            acc = -w[t - 1 - i]
            for j in range(q):
                if t - 1 - j >= 0:
                    acc -= ma[j] * jac[t - 1 - j, col]
            jac[t, col] = acc
            col += 1
        for k in range(q):
            acc = -e[t - 1 - k] if t - 1 - k >= 0 else 0.0
            for j in range(q):
                if t - 1 - j >= 0:
                    acc -= ma[j] * jac[t - 1 - j, col]
            jac[t, col] = acc
            col += 1
    return e, jac


def _fit_css(w, p, q, with_intercept):
    """Damped Gauss-Newton minimization of the conditional sum of squares."""
    intercept = float(w.mean()) if with_intercept else None
    ar = np.zeros(p)
    ma = np.zeros(q)

    def sse_of(c, a, m):
        e, _ = _css_pass(w, a, m, c, with_jacobian=False)
        return float((e[p:] ** 2).sum()), e

    sse, e = sse_of(intercept, ar, ma)
    if p + q == 0:
        # no recursion: the optimal intercept is the sample mean, exactly
        return intercept, ar, ma, sse, e

    for _ in range(ARIMA_MAX_ITER):
        e, jac = _css_pass(w, ar, ma, intercept, with_jacobian=True)
        step, *_ = np.linalg.lstsq(jac[p:], -e[p:], rcond=None)
        if not np.isfinite(step).all():
            raise NonConvergence(f"ARIMA({p},?,{q}): non-finite update")
        improved = False
        scale = 1.0
        for _ in range(25):
            col = 0
            if with_intercept:
                c_try = intercept + scale * step[col]
                col += 1
            else:
                c_try = None
            ar_try = ar + scale * step[col:col + p]
            ma_try = ma + scale * step[col + p:col + p + q]
            sse_try, e_try = sse_of(c_try, ar_try, ma_try)
            if math.isfinite(sse_try) and sse_try < sse:
                improved = True
                break
            scale /= 2.0
        if not improved:
            break  # local optimum at working precision
        gain = sse - sse_try
        intercept, ar, ma, e = c_try, ar_try, ma_try, e_try
        sse = sse_try
        if gain <= ARIMA_TOL * max(sse, 1.0):
            break
    if not math.isfinite(sse):
        raise NonConvergence(f"ARIMA({p},?,{q}): diverged")
    return intercept, ar, ma, sse, e


def fit_arima_order(series, order) -> ArimaModel:
    """Fit one (p, d, q) candidate by conditional sum of squares."""
    p, d, q = order
    y = np.asarray(series, dtype=float)
    w = difference(y, d)
    if len(w) < 10 * (p + q + 1):
        raise TooShort(
            f"ARIMA{order}: differenced length {len(w)} < {10 * (p + q + 1)}")
    intercept, ar, ma, sse, e = _fit_css(w, p, q, with_intercept=(d == 0))
    n_resid = len(w) - p
    aic = (n_resid * math.log(sse / n_resid) + 2 * (p + q + 1)
           if sse > 0 else -math.inf)
    tail = max(p, q)
    diff_tails = []
    level = y
    for _ in range(d):
        diff_tails.append(float(level[-1]))
        level = np.diff(level)
    return ArimaModel(
        order=(p, d, q),
        ar_coeffs=tuple(float(a) for a in ar),
        ma_coeffs=tuple(float(m) for m in ma),
        intercept=float(intercept) if intercept is not None else 0.0,
        sigma2=sse / n_resid,
        aic=aic,
        sse=sse,
        w_tail=tuple(float(v) for v in w[len(w) - tail:]),
        e_tail=tuple(float(v) for v in e[len(e) - tail:]),
        diff_tails=tuple(diff_tails),
    )


def fit_arima(series, p_grid=ARIMA_P_GRID, d_grid=ARIMA_D_GRID,
              q_grid=ARIMA_Q_GRID) -> ArimaModel:
    """Grid search over orders; lowest AIC wins, ties to the simpler model."""
    y = np.asarray(series, dtype=float)
    if len(y) < MIN_ARIMA_ROWS:
        raise TooShort(f"ARIMA needs >= {MIN_ARIMA_ROWS} observations, got {len(y)}")
    best = None
    statuses = []
    for p, d, q in itertools.product(p_grid, d_grid, q_grid):
        try:
            model = fit_arima_order(y, (p, d, q))
        except (NonConvergence, TooShort) as exc:
            statuses.append(f"({p},{d},{q}): {exc}")
            continue
        key = (model.aic, p + q, (p, d, q))
        if best is None or key < best[0]:
            best = (key, model)
    if best is None:
        raise NonConvergence("every ARIMA candidate failed: " + "; ".join(statuses))
    return best[1]


def arima_forecast(model: ArimaModel, horizon: int = 1) -> float:
    """Recursive forecast on the differenced scale, then un-difference."""
    p, d, q = model.order
    w_hist = list(model.w_tail)
    e_hist = list(model.e_tail)
    w_next = 0.0
    for _ in range(horizon):
        pred = model.intercept if d == 0 else 0.0
        for i in range(p):
            pred += model.ar_coeffs[i] * w_hist[-1 - i]
        for j in range(q):
            pred += model.ma_coeffs[j] * e_hist[-1 - j]
        w_next = pred
        w_hist.append(w_next)
        e_hist.append(0.0)  # future shocks at their mean
    value = w_next
    for tail in reversed(model.diff_tails):
        value = tail + value
    return float(value)


def arima_one_step_forecasts(model: ArimaModel, series, start: int) -> np.ndarray:
    """One-step-ahead forecasts for indices start..len-1.

    Coefficients stay fixed; residual feedback uses the actual values, so
    the forecast for index t only sees data through t-1.
    """
    p, d, q = model.order
    y = np.asarray(series, dtype=float)
    if not 0 < start <= len(y):
        raise ValueError("start must be inside the series")
    if start - d < p:
        raise ValueError("start falls inside the conditioning region")
    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    w = levels[-1]
    intercept = model.intercept if d == 0 else None
    e, _ = _css_pass(w, np.asarray(model.ar_coeffs), np.asarray(model.ma_coeffs),
                     intercept, with_jacobian=False)
    pred_w = w - e  # the recursion's one-step prediction at each index
    out = np.empty(len(y) - start)
    for t in range(start, len(y)):
        forecast = pred_w[t - d]  # time t in the d-times-differenced series
        for level in range(d - 1, -1, -1):
            forecast = levels[level][t - 1 - level] + forecast
        out[t - start] = forecast
    return out


# -- epsilon-SVR ---------------------------------------------------------------

@dataclass(frozen=True)
class SvrModel:
    kernel: str  # linear | rbf
    c: float
    epsilon: float
    gamma: float
    support_vectors: np.ndarray  # (n_sv, dim)
    dual_coefficients: np.ndarray  # beta_i = alpha_i - alpha_i*, nonzero
    bias: float
    kkt_gap: float
    iterations: int


def _kernel(kind: str, gamma: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    if kind == "rbf":
        sq = ((a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :]
              - 2.0 * (a @ b.T))
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kind!r}")


def _smo(gram: np.ndarray, y: np.ndarray, c: float, epsilon: float,
         tol: float = SVR_KKT_TOL, max_iter: int = SVR_MAX_ITER):
    """Maximal-violating-pair SMO on the 2l-variable dual.

    Variables 0..l-1 are alpha, l..2l-1 are alpha*; sign[t] is the
    coefficient of variable t in the equality constraint.
    """
    l = len(y)
    sign = np.concatenate([np.ones(l), -np.ones(l)])
    a = np.zeros(2 * l)
    grad = np.concatenate([epsilon - y, epsilon + y])

    iterations = 0
    while True:
        violation = -sign * grad
        up = ((sign > 0) & (a < c)) | ((sign < 0) & (a > 0))
        low = ((sign > 0) & (a > 0)) | ((sign < 0) & (a < c))
        m_val = np.where(up, violation, -np.inf).max()
        big_m_val = np.where(low, violation, np.inf).min()
        gap = m_val - big_m_val
        if gap <= tol:
            bias = (m_val + big_m_val) / 2.0
            return a, float(bias), float(gap), iterations
        if iterations >= max_iter:
            raise NonConvergence(
                f"SVR SMO hit {max_iter} iterations at KKT gap {gap:.3g}")
        i = int(np.where(up, violation, -np.inf).argmax())
        j = int(np.where(low, violation, np.inf).argmin())
        ii, jj = i % l, j % l
        eta = max(gram[ii, ii] + gram[jj, jj] - 2.0 * gram[ii, jj], 1e-12)
        s = sign[i] * sign[j]
        delta = -(grad[i] - s * grad[j]) / eta
        if s > 0:
            lo, hi = max(-a[i], a[j] - c), min(c - a[i], a[j])
        else:
            lo, hi = max(-a[i], -a[j]), min(c - a[i], c - a[j])
        delta = min(max(delta, lo), hi)
        if delta == 0.0:
            raise NonConvergence("SVR SMO stalled on a clipped step")
        a[i] += delta
        a[j] += -s * delta
        row_i = np.tile(gram[ii], 2)
        row_j = np.tile(gram[jj], 2)
        grad += sign * (sign[i] * row_i * delta + sign[j] * row_j * (-s * delta))
        iterations += 1


def _fit_svr_once(x, y, kernel, c, epsilon, gamma) -> SvrModel:
    gram = _kernel(kernel, gamma, x, x)
    a, bias, gap, iterations = _smo(gram, y, c, epsilon)
    l = len(y)
    beta = a[:l] - a[l:]
    keep = beta != 0.0
    return SvrModel(kernel, c, epsilon, gamma, x[keep].copy(), beta[keep],
                    bias, gap, iterations)


def svr_predict(model: SvrModel, x) -> float:
    x = np.asarray(x, dtype=float)
    dim = model.support_vectors.shape[1] if model.support_vectors.size else len(x)
    if x.shape != (dim,):
        raise DimensionMismatch(f"expected feature vector of length {dim}")
    if model.support_vectors.size == 0:
        return float(model.bias)
    k = _kernel(model.kernel, model.gamma, model.support_vectors,
                x.reshape(1, -1))[:, 0]
    return float(model.dual_coefficients @ k + model.bias)


def svr_predict_batch(model: SvrModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if model.support_vectors.size == 0:
        return np.full(len(x), model.bias)
    k = _kernel(model.kernel, model.gamma, x, model.support_vectors)
    return k @ model.dual_coefficients + model.bias


def fit_svr(features, targets, kernel: str = "rbf",
            c_grid=SVR_C_GRID, epsilon_grid=SVR_EPSILON_GRID,
            gamma_grid=SVR_GAMMA_GRID) -> SvrModel:
    """Grid search scored by RMSE on the chronological last 20% of the data.

    The winning parameters are refitted on the full sample.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if len(x) < MIN_SVR_ROWS:
        raise TooShort(f"SVR needs >= {MIN_SVR_ROWS} samples, got {len(x)}")
    n_val = max(1, len(x) // 5)
    cut = len(x) - n_val
    gammas = gamma_grid if kernel == "rbf" else (1.0,)

    best = None
    statuses = []
    for c, epsilon, gamma in itertools.product(sorted(c_grid),
                                               sorted(epsilon_grid),
                                               sorted(gammas)):
        try:
            candidate = _fit_svr_once(x[:cut], y[:cut], kernel, c, epsilon, gamma)
        except NonConvergence as exc:
            statuses.append(f"c={c} eps={epsilon} gamma={gamma}: {exc}")
            continue
        rmse = float(np.sqrt(np.mean(
            (svr_predict_batch(candidate, x[cut:]) - y[cut:]) ** 2)))
        if best is None or rmse < best[0]:
            best = (rmse, (c, epsilon, gamma))
    if best is None:
        raise NonConvergence("every SVR candidate failed: " + "; ".join(statuses))
    c, epsilon, gamma = best[1]
    return _fit_svr_once(x, y, kernel, c, epsilon, gamma)


def lagged_features(series, lags: int = SVR_LAGS):
    """Supervised embedding: row t is (y_{t-1}, ..., y_{t-lags}), target y_t."""
    y = np.asarray(series, dtype=float)
    if len(y) <= lags:
        raise TooShort(f"need more than {lags} observations")
    x = np.column_stack([y[lags - k - 1:len(y) - k - 1] for k in range(lags)])
    return x, y[lags:]


def directions_from_forecasts(forecasts, previous_closes) -> np.ndarray:
    """Down when the forecast is strictly below yesterday's close, else Up."""
    forecasts = np.asarray(forecasts, dtype=float)
    previous_closes = np.asarray(previous_closes, dtype=float)
    if forecasts.shape != previous_closes.shape:
        raise DimensionMismatch("forecasts and previous closes must align")
    return np.where(forecasts < previous_closes, DOWN, UP).astype(np.int8)
