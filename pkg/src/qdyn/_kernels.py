"""Compiled inner loops.

Every stochastic step consumes exactly one uniform per agent, agent 0
first. Python-level single steps call the same functions, so a run and a
hand-driven sequence of steps draw identical actions from identical
streams.
"""

import numpy as np
from numba import njit

IQL = 0
FAQL = 1


@njit(cache=True, nogil=True)
def softmax_into(q, temperature, out):
    m = q[0]
    for a in range(1, q.shape[0]):
        if q[a] > m:
            m = q[a]
    s = 0.0
    for a in range(q.shape[0]):
        out[a] = np.exp((q[a] - m) / temperature)
        s += out[a]
    for a in range(q.shape[0]):
        out[a] /= s


@njit(cache=True, nogil=True)
def sample_action(pi, u):
    # inverse CDF; the last action absorbs rounding in the cumulative sum
    c = 0.0
    n = pi.shape[0]
    for a in range(n - 1):
        c += pi[a]
        if u < c:
            return a
    return n - 1


@njit(cache=True, nogil=True)
def vmax(x):
    m = x[0]
    for a in range(1, x.shape[0]):
        if x[a] > m:
            m = x[a]
    return m


@njit(cache=True, nogil=True)
def td_step(q0, q1, r0, r1, alpha, gamma, temp, beta, mode, u0, u1, pi0, pi1, forced0, forced1):
    """One incremental update of both agents, in place.

    ``forced*`` >= 0 overrides the sampled action. Returns the joint
    action and the two rewards.
    """
    softmax_into(q0, temp[0], pi0)
    softmax_into(q1, temp[1], pi1)
    a0 = forced0 if forced0 >= 0 else sample_action(pi0, u0)
    a1 = forced1 if forced1 >= 0 else sample_action(pi1, u1)
    rew0 = r0[a0, a1]
    rew1 = r1[a1, a0]
    lr0 = alpha[0]
    lr1 = alpha[1]
    if mode == FAQL:
        lr0 *= min(beta[0] / pi0[a0], 1.0)
        lr1 *= min(beta[1] / pi1[a1], 1.0)
    # both targets use the pre-step values of each agent's own table
    t0 = rew0 + gamma[0] * vmax(q0) - q0[a0]
    t1 = rew1 + gamma[1] * vmax(q1) - q1[a1]
    q0[a0] += lr0 * t0
    q1[a1] += lr1 * t1
    return a0, a1, rew0, rew1


@njit(cache=True, nogil=True)
def run_incremental(q0, q1, r0, r1, alpha, gamma, temp, beta, mode, uniforms,
                    step0, stride, rec_steps, rec_q, actions, rewards, record_actions):
    """Advance ``uniforms.shape[0] // 2`` steps; record every ``stride``-th.

    Returns the number of recorded samples.
    """
    n0 = q0.shape[0]
    pi0 = np.empty(n0)
    pi1 = np.empty(q1.shape[0])
    n_steps = uniforms.shape[0] // 2
    k = 0
    for s in range(n_steps):
        a0, a1, rew0, rew1 = td_step(q0, q1, r0, r1, alpha, gamma, temp, beta, mode,
                                     uniforms[2 * s], uniforms[2 * s + 1], pi0, pi1, -1, -1)
        if record_actions:
            actions[s, 0] = a0
            actions[s, 1] = a1
            rewards[s, 0] = rew0
            rewards[s, 1] = rew1
        step = step0 + s + 1
        if step % stride == 0:
            rec_steps[k] = step
            rec_q[k, :n0] = q0
            rec_q[k, n0:] = q1
            k += 1
    return k


@njit(cache=True, nogil=True)
def batch_td(q0, q1, pi0, pi1, r0, r1, gamma, uniforms, actions, rewards, record_actions):
    """Play ``uniforms.shape[0] // 2`` joint actions under frozen policies.

    Returns per-action TD-error sums and visit counts for both agents; the
    bootstrap term uses the frozen tables passed in.
    """
    n0 = q0.shape[0]
    n1 = q1.shape[0]
    sum0 = np.zeros(n0)
    sum1 = np.zeros(n1)
    cnt0 = np.zeros(n0)
    cnt1 = np.zeros(n1)
    boot0 = gamma[0] * vmax(q0)
    boot1 = gamma[1] * vmax(q1)
    for k in range(uniforms.shape[0] // 2):
        a0 = sample_action(pi0, uniforms[2 * k])
        a1 = sample_action(pi1, uniforms[2 * k + 1])
        rew0 = r0[a0, a1]
        rew1 = r1[a1, a0]
        sum0[a0] += rew0 + boot0 - q0[a0]
        sum1[a1] += rew1 + boot1 - q1[a1]
        cnt0[a0] += 1.0
        cnt1[a1] += 1.0
        if record_actions:
            actions[k, 0] = a0
            actions[k, 1] = a1
            rewards[k, 0] = rew0
            rewards[k, 1] = rew1
    return sum0, sum1, cnt0, cnt1


@njit(cache=True, nogil=True)
def apply_batch(q0, q1, alpha, sum0, sum1, cnt0, cnt1):
    for a in range(q0.shape[0]):
        q0[a] += alpha[0] * sum0[a] / max(1.0, cnt0[a])
    for a in range(q1.shape[0]):
        q1[a] += alpha[1] * sum1[a] / max(1.0, cnt1[a])


@njit(cache=True, nogil=True)
def run_batch(q0, q1, r0, r1, alpha, gamma, temp, batch_size, uniforms,
              step0, stride, rec_steps, rec_q, actions, rewards, record_actions):
    """Batch Q-learning over a chunk whose length is a multiple of the batch."""
    n0 = q0.shape[0]
    pi0 = np.empty(n0)
    pi1 = np.empty(q1.shape[0])
    n_steps = uniforms.shape[0] // 2
    k = 0
    s = 0
    while s < n_steps:
        softmax_into(q0, temp[0], pi0)
        softmax_into(q1, temp[1], pi1)
        u = uniforms[2 * s: 2 * (s + batch_size)]
        sum0, sum1, cnt0, cnt1 = batch_td(q0, q1, pi0, pi1, r0, r1, gamma, u,
                                          actions[s:], rewards[s:], record_actions)
        # samples inside a batch see the tables from the last committed update
        for j in range(batch_size):
            step = step0 + s + j + 1
            if step % stride == 0 and j < batch_size - 1:
                rec_steps[k] = step
                rec_q[k, :n0] = q0
                rec_q[k, n0:] = q1
                k += 1
        apply_batch(q0, q1, alpha, sum0, sum1, cnt0, cnt1)
        step = step0 + s + batch_size
        if step % stride == 0:
            rec_steps[k] = step
            rec_q[k, :n0] = q0
            rec_q[k, n0:] = q1
            k += 1
        s += batch_size
    return k


@njit(cache=True, nogil=True)
def iterate_cpa(q, r0, r1, alpha, gamma, temp, n0, n_steps, stride, rec_q):
    """Iterate the choice-probability-aware map ``n_steps`` times."""
    n = q.shape[0]
    n1 = n - n0
    pi0 = np.empty(n0)
    pi1 = np.empty(n1)
    er0 = np.empty(n0)
    er1 = np.empty(n1)
    k = 0
    for s in range(n_steps):
        q0 = q[:n0]
        q1 = q[n0:]
        softmax_into(q0, temp[0], pi0)
        softmax_into(q1, temp[1], pi1)
        for a in range(n0):
            acc = 0.0
            for b in range(n1):
                acc += r0[a, b] * pi1[b]
            er0[a] = acc
        for a in range(n1):
            acc = 0.0
            for b in range(n0):
                acc += r1[a, b] * pi0[b]
            er1[a] = acc
        m0 = vmax(q0)
        m1 = vmax(q1)
        for a in range(n0):
            q0[a] += alpha[0] * pi0[a] * (er0[a] + gamma[0] * m0 - q0[a])
        for a in range(n1):
            q1[a] += alpha[1] * pi1[a] * (er1[a] + gamma[1] * m1 - q1[a])
        if (s + 1) % stride == 0:
            rec_q[k] = q
            k += 1
    return k
