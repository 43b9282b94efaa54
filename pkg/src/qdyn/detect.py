"""Trajectory classifiers: limit cycles and metastable phases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from qdyn.analysis import target_values
from qdyn.errors import InputDomainError
from qdyn.policy import split
from qdyn.stochastic import Trajectory, agent_pair, policies_of

MIN_CYCLE_SAMPLES = 1000
MIN_WINDOW = 100
DEFAULT_WINDOW = 500


@dataclass
class LimitCycle:
    amplitude: float
    period: float
    n_peaks: int
    peak_steps: np.ndarray

    def to_dict(self):
        return {"amplitude": self.amplitude, "period": self.period, "n_peaks": self.n_peaks,
                "peak_steps": [float(s) for s in self.peak_steps]}


def _halves_agree(values, tol, scale):
    values = np.asarray(values, dtype=np.float64)
    half = values.size // 2
    first, second = values[:half].mean(), values[values.size - half:].mean()
    return abs(second - first) <= tol * scale


def _series(trajectory, steps):
    if isinstance(trajectory, Trajectory):
        return trajectory.pi_c[:, 0], trajectory.steps
    x = np.asarray(trajectory, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, 0]
    return x, (np.arange(x.size) if steps is None else np.asarray(steps))


def detect_limit_cycle(trajectory, settle_fraction=0.5, amplitude_threshold=1e-3,
                       spacing_tol=0.05, steps=None, prominence_fraction=0.5):
    """Look for a sustained oscillation of ``pi1_C`` after a transient.

    The first ``settle_fraction`` of the samples is discarded. A cycle is
    declared when the remaining half peak-to-peak amplitude exceeds
    ``amplitude_threshold`` and both the peak spacings and the peak
    heights have stopped changing: the mean over the earlier half of the
    peaks agrees with the mean over the later half within ``spacing_tol``
    (spacings relative to their mean, heights relative to the peak-to-peak
    range). A decaying or growing spiral therefore is not a cycle.

    Parameters
    ----------
    trajectory : Trajectory, (n, d) policies or (n,) pi1_C series
    steps : array, optional
        Step index per sample; taken from a Trajectory, else sample index.

    Returns
    -------
    LimitCycle or None
    """
    x, st = _series(trajectory, steps)
    if not 0.0 <= settle_fraction < 1.0:
        raise InputDomainError("settle_fraction must lie in [0, 1)")
    start = int(np.floor(settle_fraction * x.size))
    x, st = x[start:], st[start:]
    if x.size < MIN_CYCLE_SAMPLES:
        raise InputDomainError(
            f"need at least {MIN_CYCLE_SAMPLES} samples after settling, got {x.size}"
        )
    span = float(x.max() - x.min())
    amplitude = 0.5 * span
    if amplitude <= amplitude_threshold:
        return None
    peaks, _ = find_peaks(x, prominence=prominence_fraction * span)
    if peaks.size < 3:
        return None
    spacing = np.diff(st[peaks]).astype(np.float64)
    if not _halves_agree(spacing, spacing_tol, spacing.mean()):
        return None
    if not _halves_agree(x[peaks], spacing_tol, span):
        return None
    return LimitCycle(amplitude=amplitude, period=float(spacing.mean()),
                      n_peaks=int(peaks.size), peak_steps=st[peaks])


@dataclass
class MetastableInterval:
    start_step: float
    end_step: float
    slow_coordinate: int
    slow_label: str
    drift: float
    mean_policy: np.ndarray

    @property
    def asymmetry(self):
        return float(abs(self.mean_policy[0] - self.mean_policy[1]))

    @property
    def duration(self):
        return self.end_step - self.start_step

    def to_dict(self):
        return {"start_step": float(self.start_step), "end_step": float(self.end_step),
                "slow_coordinate": self.slow_label, "drift": self.drift,
                "mean_pi_c": [float(v) for v in self.mean_policy],
                "asymmetry": self.asymmetry}


def coordinate_labels(game):
    return [f"Q{i + 1}_{a}" for i in range(2) for a in game.action_labels[i]]


def detect_metastability(q_trajectory, game, params, window=DEFAULT_WINDOW, drift_threshold=1e-3,
                         policy_tol=1e-3, steps=None, min_windows=2):
    """Find stretches where the policy stalls while a Q-value keeps drifting.

    Samples are grouped into consecutive windows of ``window`` samples and
    compared through their window means. A window is quiet when no
    cooperation probability moved by ``policy_tol`` or more since the
    previous window. A run of at least ``min_windows`` quiet windows is
    reported when some Q-coordinate moves monotonically toward its target
    value (against the opponent's window-mean policy) throughout the run,
    on average by more than ``drift_threshold`` per window. Touching
    intervals with the same slow coordinate are merged.

    Stochastic runs need windows long enough to average out single-update
    kicks of the policy; 500 samples works for the usual settings.

    Returns
    -------
    list of MetastableInterval
    """
    if isinstance(q_trajectory, Trajectory):
        q, st = q_trajectory.q, q_trajectory.steps
    else:
        q = np.atleast_2d(np.asarray(q_trajectory, dtype=np.float64))
        st = np.arange(q.shape[0]) if steps is None else np.asarray(steps)
    if window < MIN_WINDOW:
        raise InputDomainError(f"window must be at least {MIN_WINDOW} samples")
    p = agent_pair(params)
    temps = (p[0].temperature, p[1].temperature)
    n_win = q.shape[0] // window
    if n_win < 2:
        return []
    q = q[: n_win * window]
    pi = policies_of(q, temps, game.n_actions)
    q_mean = q.reshape(n_win, window, -1).mean(axis=1)
    pi_mean = pi.reshape(n_win, window, -1).mean(axis=1)
    n0 = game.n_actions[0]
    pc = pi_mean[:, [0, n0]]
    targets = np.empty_like(q_mean)
    for w in range(n_win):
        pis = split(pi_mean[w], game.n_actions)
        targets[w] = np.concatenate([target_values(game, i, pis[1 - i], p) for i in range(2)])

    quiet = np.zeros(n_win, dtype=bool)
    quiet[1:] = np.max(np.abs(np.diff(pc, axis=0)), axis=1) < policy_tol
    labels = coordinate_labels(game)
    intervals = []
    w = 1
    while w < n_win:
        if not quiet[w]:
            w += 1
            continue
        end = w
        while end + 1 < n_win and quiet[end + 1]:
            end += 1
        # windows w-1 .. end form the stretch; diffs are taken inside it
        if end - w + 1 >= min_windows:
            found = _drifting_coordinate(q_mean[w - 1: end + 1], targets[w - 1: end + 1],
                                         drift_threshold)
            if found is not None:
                k, rate = found
                prev = intervals[-1] if intervals else None
                if prev is not None and prev[1] + 1 >= w - 1 and prev[2] == k:
                    n_prev = prev[1] - prev[0]
                    n_new = end - w + 1
                    rate = (prev[3] * n_prev + rate * n_new) / (n_prev + n_new)
                    intervals[-1] = (prev[0], end, k, rate)
                else:
                    intervals.append((w - 1, end, k, rate))
        w = end + 1
    return [
        MetastableInterval(
            start_step=float(st[a * window]), end_step=float(st[(b + 1) * window - 1]),
            slow_coordinate=k, slow_label=labels[k], drift=rate,
            mean_policy=pc[a: b + 1].mean(axis=0),
        )
        for a, b, k, rate in intervals
    ]


def _drifting_coordinate(q_mean, targets, drift_threshold):
    dq = np.diff(q_mean, axis=0)
    toward = np.sign(targets[:-1] - q_mean[:-1])
    # monotone toward the target in every window, never away from it
    monotone = np.all(dq * toward >= 0.0, axis=0)
    rate = np.abs(q_mean[-1] - q_mean[0]) / dq.shape[0]
    ok = monotone & (rate > drift_threshold)
    if not np.any(ok):
        return None
    k = int(np.argmax(np.where(ok, rate, -np.inf)))
    return k, float(rate[k])
