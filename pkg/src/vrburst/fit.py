"""Fitting pipeline: recover model constants from burst traces.

Per (rate, fps) group of traces this fits a logistic to the inter-frame
intervals (moment matching) and a two-component Gaussian mixture to the
frame sizes (EM with random restarts). Across groups it pools the results:
zero-intercept linear fits of the component means against the empirical mean
frame size, power-law fits of the component standard deviations, and the
mean of (IFI std * fps) for the inverse-law coefficient. The pooled result
is a :class:`~vrburst.model.VrModelConstants` ready for the generators.

Sample standard deviations use the n-1 denominator throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .generator import TraceFile
from .model import VrModelConstants
from .rv import Gmm2Params, LogisticParams, RngStream

_LOG_2PI = math.log(2.0 * math.pi)
# relative slack when checking that EM never decreases the log-likelihood
_MONOTONE_SLACK = 1e-8


def fit_logistic(samples) -> LogisticParams:
    """Moment-matched logistic fit: mu = mean, s = std * sqrt(3) / pi."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError(f"logistic fit needs at least 2 samples, got {x.size}")
    std = float(x.std(ddof=1))
    return LogisticParams(mu=float(x.mean()), s=std * math.sqrt(3.0) / math.pi)


@dataclass(frozen=True)
class Gmm2Fit:
    """Best EM result over all restarts; components labeled by mean."""

    params: Gmm2Params
    log_likelihood: float
    n_iterations: int
    converged: bool


def _em_step_loglik(x, w, mu, sigma):
    """One E step: responsibilities of component 0 and the log-likelihood."""
    with np.errstate(divide="ignore"):
        a = np.log(w[0]) - np.log(sigma[0]) - 0.5 * _LOG_2PI - 0.5 * ((x - mu[0]) / sigma[0]) ** 2
        b = np.log(w[1]) - np.log(sigma[1]) - 0.5 * _LOG_2PI - 0.5 * ((x - mu[1]) / sigma[1]) ** 2
    # two-term logsumexp; responsibilities of component 1 follow as 1 - r0
    high = np.maximum(a, b)
    norm = high + np.log1p(np.exp(-np.abs(a - b)))
    return np.exp(a - norm), float(norm.sum())


def fit_gmm2_em(
    samples,
    restarts: int = 50,
    max_iter: int = 500,
    tol: float = 1e-8,
    rng: RngStream | None = None,
) -> Gmm2Fit:
    """EM fit of a 2-component univariate Gaussian mixture.

    Each restart initializes the means from two distinct uniformly chosen
    samples, both sigmas from the sample std and equal weights, then iterates
    until the log-likelihood improves by less than ``tol`` (or ``max_iter``).
    Sigmas are floored at 1e-6 of the sample std to prevent collapse. The
    restart with the highest log-likelihood wins; ties keep the earliest.
    """
    if restarts < 1:
        raise ValueError(f"mixture fit needs at least 1 restart, got {restarts}")
    if rng is None:
        rng = RngStream(0)
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError(f"mixture fit needs at least 10 samples, got {n}")
    sample_std = float(x.std(ddof=1))
    if sample_std == 0.0:
        raise ValueError("mixture fit is degenerate: all samples are equal")
    sigma_floor = 1e-6 * sample_std
    x_sum = float(x.sum())

    best: tuple | None = None
    for _ in range(restarts):
        i = int(rng.uniform() * n)
        j = int(rng.uniform() * n)
        while j == i:
            j = int(rng.uniform() * n)
        w = np.array([0.5, 0.5])
        mu = np.array([x[i], x[j]])
        sigma = np.array([sample_std, sample_std])

        ll = -math.inf
        iterations = 0
        converged = False
        for iterations in range(1, max_iter + 1):
            r0, new_ll = _em_step_loglik(x, w, mu, sigma)
            if new_ll < ll - _MONOTONE_SLACK * max(1.0, abs(ll)):
                raise RuntimeError(
                    f"EM log-likelihood decreased ({ll} -> {new_ll}); "
                    "this indicates a numerical defect"
                )
            delta = new_ll - ll
            ll = new_ll
            if delta < tol:
                converged = True
                break
            n0 = float(r0.sum())
            n1 = n - n0
            if min(n0, n1) < 1e-12 or not math.isfinite(n0):
                break  # a component lost all responsibility; keep previous params
            wx0 = float(r0 @ x)
            mu0 = wx0 / n0
            mu1 = (x_sum - wx0) / n1
            dev0 = (x - mu0) ** 2
            dev1 = (x - mu1) ** 2
            var0 = float(r0 @ dev0) / n0
            var1 = (float(dev1.sum()) - float(r0 @ dev1)) / n1
            w = np.array([n0 / n, n1 / n])
            mu = np.array([mu0, mu1])
            sigma = np.maximum(np.sqrt([max(var0, 0.0), max(var1, 0.0)]), sigma_floor)
        else:
            # ran out of iterations: refresh the log-likelihood of the final params
            _, ll = _em_step_loglik(x, w, mu, sigma)

        if best is None or ll > best[0]:
            best = (ll, iterations, converged, w.copy(), mu.copy(), sigma.copy())

    ll, iterations, converged, w, mu, sigma = best
    hi, lo = (0, 1) if mu[0] >= mu[1] else (1, 0)
    params = Gmm2Params(
        w_hi=float(w[hi]),
        mu_hi=float(mu[hi]),
        sigma_hi=float(sigma[hi]),
        mu_lo=float(mu[lo]),
        sigma_lo=float(sigma[lo]),
    )
    return Gmm2Fit(params=params, log_likelihood=ll, n_iterations=iterations, converged=converged)


def fit_linear_through_origin(points, weights=None) -> float:
    """Weighted least-squares slope with the intercept forced to zero."""
    pts = list(points)
    if not pts:
        raise ValueError("linear fit needs at least one point")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    denom = float((w * x * x).sum())
    if denom <= 0.0:
        raise ValueError("linear fit through the origin needs a non-zero abscissa")
    return float((w * x * y).sum() / denom)


def fit_power_law(points, weights=None) -> tuple[float, float]:
    """Fit y = coeff * x**exp by weighted least squares in log-log space."""
    pts = list(points)
    if len(pts) < 2:
        raise ValueError(f"power-law fit needs at least 2 points, got {len(pts)}")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive coordinates")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    lx, ly = np.log(x), np.log(y)
    wsum = float(w.sum())
    mx = float((w * lx).sum() / wsum)
    my = float((w * ly).sum() / wsum)
    sxx = float((w * (lx - mx) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("power-law fit needs at least two distinct abscissae")
    exponent = float((w * (lx - mx) * (ly - my)).sum() / sxx)
    coeff = math.exp(my - exponent * mx)
    return coeff, exponent


def derive_weights(slope_hi: float, slope_lo: float) -> tuple[float, float]:
    """Mixture weights implied by the mean slopes.

    Choosing (1 - slope_lo) / (slope_hi - slope_lo) for the high component is
    the unique weighting for which the mixture mean equals the ideal frame
    size, for every frame size at once; it exists iff the slopes straddle 1.
    """
    if slope_hi == slope_lo:
        raise ValueError("mean slopes are equal; mixture weights are undefined")
    if not slope_lo <= 1.0 <= slope_hi:
        raise ValueError(
            f"mean slopes must straddle 1 (lo <= 1 <= hi), got lo={slope_lo}, hi={slope_hi}"
        )
    span = slope_hi - slope_lo
    return (1.0 - slope_lo) / span, (slope_hi - 1.0) / span


@dataclass
class GroupFit:
    """Per-(rate, fps) fit results feeding the pooled regressions."""

    rate_bps: float
    fps: float
    n_frames: int
    mean_frame_size: float  # empirical mean, bytes
    gmm: Gmm2Fit
    ifi: LogisticParams
    ifi_std_coeff: float  # (fitted IFI std) * fps
    mean_log_likelihood: float
    weight: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rate_mbps": self.rate_bps / 1e6,
            "fps": self.fps,
            "n_frames": self.n_frames,
            "mean_frame_size_bytes": self.mean_frame_size,
            "gmm": {
                "w_hi": self.gmm.params.w_hi,
                "mu_hi": self.gmm.params.mu_hi,
                "sigma_hi": self.gmm.params.sigma_hi,
                "mu_lo": self.gmm.params.mu_lo,
                "sigma_lo": self.gmm.params.sigma_lo,
                "log_likelihood": self.gmm.log_likelihood,
                "n_iterations": self.gmm.n_iterations,
                "converged": self.gmm.converged,
            },
            "ifi": {"mu": self.ifi.mu, "s": self.ifi.s, "std": self.ifi.std},
            "ifi_std_coeff": self.ifi_std_coeff,
            "mean_log_likelihood": self.mean_log_likelihood,
            "weight": self.weight,
        }


@dataclass
class FitReport:
    """Pooled fit over all groups plus the per-group details."""

    groups: list[GroupFit]
    ifi_std_coeff: float
    iframe_mean_slope: float
    pframe_mean_slope: float
    iframe_std_coeff: float
    iframe_std_exp: float
    pframe_std_coeff: float
    pframe_std_exp: float
    weighting: str
    slopes_valid: bool
    constants: VrModelConstants | None

    def to_dict(self) -> dict:
        return {
            "weighting": self.weighting,
            "slopes_valid": self.slopes_valid,
            "pooled": {
                "ifi_std_coeff": self.ifi_std_coeff,
                "iframe_mean_slope": self.iframe_mean_slope,
                "pframe_mean_slope": self.pframe_mean_slope,
                "iframe_std_coeff": self.iframe_std_coeff,
                "iframe_std_exp": self.iframe_std_exp,
                "pframe_std_coeff": self.pframe_std_coeff,
                "pframe_std_exp": self.pframe_std_exp,
            },
            "constants": self.constants.to_dict() if self.constants else None,
            "groups": [g.to_dict() for g in self.groups],
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _goodness_weights(mean_lls, weighting: str) -> np.ndarray:
    count = len(mean_lls)
    if weighting == "uniform":
        return np.full(count, 1.0 / count)
    if weighting != "rank":
        raise ValueError(f"unknown weighting {weighting!r} (expected 'rank' or 'uniform')")
    # mean log-likelihoods are negative, so weight by goodness rank instead
    # of by value: the best-fitting group gets rank G, the worst rank 1
    ranks = np.empty(count)
    ranks[np.argsort(mean_lls, kind="stable")] = np.arange(1, count + 1)
    return ranks / ranks.sum()


def group_traces(traces) -> dict[tuple[float, float], TraceFile]:
    """Group traces by the (target_rate_mbps, fps) keys in their metadata.

    Traces sharing a key are concatenated into one group.
    """
    groups: dict[tuple[float, float], TraceFile] = {}
    for trace in traces:
        try:
            rate_bps = float(trace.metadata["target_rate_mbps"]) * 1e6
            fps = float(trace.metadata["fps"])
        except KeyError as exc:
            raise ValueError(
                f"trace metadata is missing the {exc} key needed for grouping "
                "(expected 'target_rate_mbps' and 'fps')"
            ) from None
        key = (rate_bps, fps)
        if key in groups:
            groups[key].records.extend(trace.records)
        else:
            groups[key] = TraceFile(records=list(trace.records), metadata=dict(trace.metadata))
    return groups


def fit_vr_model(
    groups: dict[tuple[float, float], TraceFile],
    em_restarts: int = 50,
    em_max_iter: int = 500,
    em_tol: float = 1e-8,
    seed: int = 0,
    weighting: str = "rank",
) -> FitReport:
    """Fit the full model across (rate, fps) groups.

    ``groups`` maps (target rate in bit/s, frame rate) to the group's trace.
    Regressions run against each group's *empirical* mean frame size, and the
    linear/power-law fits weigh groups by mixture-fit goodness (see
    ``weighting``: 'rank' or 'uniform').
    """
    if len(groups) < 2:
        raise ValueError(f"model fit needs at least 2 (rate, fps) groups, got {len(groups)}")

    fits: list[GroupFit] = []
    for index, key in enumerate(sorted(groups)):
        rate_bps, fps = key
        trace = groups[key]
        sizes = np.array([r.burst_size for r in trace.records], dtype=float)
        ifis = np.array([r.next_period_ns for r in trace.records], dtype=float) * 1e-9
        gmm = fit_gmm2_em(
            sizes,
            restarts=em_restarts,
            max_iter=em_max_iter,
            tol=em_tol,
            rng=RngStream(seed, index),
        )
        ifi = fit_logistic(ifis)
        fits.append(
            GroupFit(
                rate_bps=rate_bps,
                fps=fps,
                n_frames=len(trace.records),
                mean_frame_size=float(sizes.mean()),
                gmm=gmm,
                ifi=ifi,
                ifi_std_coeff=ifi.std * fps,
                mean_log_likelihood=gmm.log_likelihood / len(sizes),
            )
        )

    weights = _goodness_weights([g.mean_log_likelihood for g in fits], weighting)
    for fit, weight in zip(fits, weights):
        fit.weight = float(weight)

    sizes_emp = [g.mean_frame_size for g in fits]
    hi_slope = fit_linear_through_origin(
        zip(sizes_emp, (g.gmm.params.mu_hi for g in fits)), weights
    )
    lo_slope = fit_linear_through_origin(
        zip(sizes_emp, (g.gmm.params.mu_lo for g in fits)), weights
    )
    hi_coeff, hi_exp = fit_power_law(
        list(zip(sizes_emp, (g.gmm.params.sigma_hi for g in fits))), weights
    )
    lo_coeff, lo_exp = fit_power_law(
        list(zip(sizes_emp, (g.gmm.params.sigma_lo for g in fits))), weights
    )
    ifi_coeff = float(np.mean([g.ifi_std_coeff for g in fits]))

    slopes_valid = lo_slope <= 1.0 <= hi_slope
    constants = None
    if slopes_valid:
        constants = VrModelConstants(
            ifi_std_coeff=ifi_coeff,
            iframe_mean_slope=hi_slope,
            pframe_mean_slope=lo_slope,
            iframe_std_coeff=hi_coeff,
            iframe_std_exp=hi_exp,
            pframe_std_coeff=lo_coeff,
            pframe_std_exp=lo_exp,
        )
    return FitReport(
        groups=fits,
        ifi_std_coeff=ifi_coeff,
        iframe_mean_slope=hi_slope,
        pframe_mean_slope=lo_slope,
        iframe_std_coeff=hi_coeff,
        iframe_std_exp=hi_exp,
        pframe_std_coeff=lo_coeff,
        pframe_std_exp=lo_exp,
        weighting=weighting,
        slopes_valid=slopes_valid,
        constants=constants,
    )


__all__ = [
    "FitReport",
    "Gmm2Fit",
    "GroupFit",
    "derive_weights",
    "fit_gmm2_em",
    "fit_linear_through_origin",
    "fit_logistic",
    "fit_power_law",
    "fit_vr_model",
    "group_traces",
]
