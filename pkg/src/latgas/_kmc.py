"""Compiled event loop for the boundary-driven exclusion process.

Event channels are the N bonds: channel 0 flips site 1 (left reservoir),
channel N-1 flips site N-1 (right reservoir), channel x in 1..N-2 exchanges
sites x and x+1. Each channel carries a rate in units of N^2/2; a binary
sum tree over the channels gives O(log N) sampling and updates.

Sites are stored 1-based in ``eta[1..N-1]``; ``eta[0]`` and ``eta[N]`` are
unused.
"""
import numpy as np
from numba import njit


def tree_size(n_channels):
    P = 1
    while P < n_channels:
        P *= 2
    return P


@njit(cache=True, nogil=True)
def channel_rate(eta, N, alpha, beta, x):
    if x == 0:
        return alpha if eta[1] == 0 else 1.0 - alpha
    if x == N - 1:
        return beta if eta[N - 1] == 0 else 1.0 - beta
    return 1.0 if eta[x] != eta[x + 1] else 0.0


@njit(cache=True, nogil=True)
def tree_set(tree, P, x, value):
    i = P + x
    tree[i] = value
    i //= 2
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i //= 2


@njit(cache=True, nogil=True)
def build_tree(tree, P, eta, N, alpha, beta):
    tree[:] = 0.0
    for x in range(N):
        tree[P + x] = channel_rate(eta, N, alpha, beta, x)
    for i in range(P - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]


@njit(cache=True, nogil=True)
def tree_pick(tree, P, target):
    i = 1
    while i < P:
        left = tree[2 * i]
        if target < left:
            i = 2 * i
        else:
            target -= left
            i = 2 * i + 1
    return i - P


@njit(cache=True, nogil=True)
def _flip(eta, x, t, acc1, last1, acc2, last2, track, N):
    # flush time integrals involving site x before it changes
    acc1[x] += eta[x] * (t - last1[x])
    last1[x] = t
    if track:
        for y in range(1, N):
            if y != x:
                a = x if x < y else y
                b = y if x < y else x
                acc2[a, b] += eta[a] * eta[b] * (t - last2[a, b])
                last2[a, b] = t
    eta[x] = 1 - eta[x]


@njit(cache=True, nogil=True)
def run_until(eta, W, tree, P, N, alpha, beta, t, t_stop, U, upos,
              acc1, last1, acc2, last2, track, eta0, W0, check):
    """Advance from time t to t_stop (macroscopic units).

    Consumes uniforms from ``U`` starting at ``upos``; returns
    (t, upos, n_events, done). If the buffer runs out before t_stop the loop
    returns with done = False and the caller refills ``U``. The pending event
    that would overshoot t_stop is discarded, which is exact by the memoryless
    property.
    """
    scale = 0.5 * N * N
    n_events = 0
    n_u = U.shape[0]
    while True:
        if upos + 2 > n_u:
            return t, upos, n_events, False
        total = tree[1] * scale
        if total <= 0.0:
            # absorbing configuration (only possible with alpha, beta in {0, 1})
            return t_stop, upos, n_events, True
        u1 = U[upos]
        u2 = U[upos + 1]
        upos += 2
        t_next = t - np.log(1.0 - u1) / total
        if t_next >= t_stop:
            return t_stop, upos, n_events, True
        t = t_next
        x = tree_pick(tree, P, u2 * tree[1])
        if x >= N or tree[P + x] <= 0.0:
            # roundoff landed on an empty channel; a null event is harmless
            continue
        n_events += 1
        if x == 0:
            W[0] += 1 if eta[1] == 0 else -1
            _flip(eta, 1, t, acc1, last1, acc2, last2, track, N)
            tree_set(tree, P, 0, channel_rate(eta, N, alpha, beta, 0))
            tree_set(tree, P, 1, channel_rate(eta, N, alpha, beta, 1))
        elif x == N - 1:
            # entering from the right reservoir is a jump N -> N-1
            W[N - 1] += -1 if eta[N - 1] == 0 else 1
            _flip(eta, N - 1, t, acc1, last1, acc2, last2, track, N)
            tree_set(tree, P, N - 1, channel_rate(eta, N, alpha, beta, N - 1))
            tree_set(tree, P, N - 2, channel_rate(eta, N, alpha, beta, N - 2))
        else:
            W[x] += 1 if eta[x] == 1 else -1
            _flip(eta, x, t, acc1, last1, acc2, last2, track, N)
            _flip(eta, x + 1, t, acc1, last1, acc2, last2, track, N)
            for y in (x - 1, x, x + 1):
                if 0 <= y <= N - 1:
                    tree_set(tree, P, y, channel_rate(eta, N, alpha, beta, y))
        if check:
            for s in range(1, N):
                if eta[s] - eta0[s] != (W[s - 1] - W0[s - 1]) - (W[s] - W0[s]):
                    raise AssertionError("particle conservation violated")


@njit(cache=True, nogil=True)
def flush(eta, t, acc1, last1, acc2, last2, track, N):
    for x in range(1, N):
        acc1[x] += eta[x] * (t - last1[x])
        last1[x] = t
    if track:
        for a in range(1, N):
            for b in range(a + 1, N):
                acc2[a, b] += eta[a] * eta[b] * (t - last2[a, b])
                last2[a, b] = t
