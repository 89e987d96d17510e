"""Independent reference implementations used by the tests."""

import itertools

import numpy as np


def path_score(log_obs, log_trans, seq):
    """Score accumulated in trellis order: ``s = obs_t + (s + trans)``."""
    s = float(log_obs[0][seq[0]])
    for t in range(1, len(seq)):
        s = float(log_obs[t][seq[t]]) + (s + float(log_trans[seq[t - 1]][seq[t]]))
    return s


def brute_force_viterbi(log_obs, log_trans, candidates=None):
    """Exhaustive MAP sequence.

    Among equal-score sequences the winner is the one that is smallest when
    read backwards from the last step, which is what a smallest-index tie
    rule in both the final argmax and every backpointer produces.
    ``candidates[t]`` optionally restricts the cells at step ``t``.
    """
    T = len(log_obs)
    N = len(log_obs[0])
    sets = candidates if candidates is not None else [range(N)] * T
    best, best_seq = -np.inf, None
    for seq in itertools.product(*sets):
        s = path_score(log_obs, log_trans, seq)
        if s > best or (s == best and seq[::-1] < best_seq[::-1]):
            best, best_seq = s, seq
    return list(best_seq), best


def linear_viterbi(obs, trans):
    """Probability-domain Viterbi with per-column rescaling to stay in range."""
    obs = np.asarray(obs, dtype=float)
    trans = np.asarray(trans, dtype=float)
    T, N = obs.shape
    phi = obs[0] / obs[0].max()
    back = []
    for t in range(1, T):
        cand = phi[:, None] * trans  # cand[j, i]
        arg = np.argmax(cand, axis=0)
        phi = obs[t] * cand[arg, np.arange(N)]
        phi = phi / phi.max()
        back.append(arg)
    seq = [int(np.argmax(phi))]
    for arg in reversed(back):
        seq.append(int(arg[seq[-1]]))
    return seq[::-1]


def brute_force_viterbi_np(log_obs, log_trans):
    """Vectorized ``brute_force_viterbi`` over all ``N**T`` sequences.

    Element-wise float operations happen in the same order as
    ``path_score``, so scores are bit-identical to the scalar version.
    """
    log_obs = np.asarray(log_obs, dtype=float)
    log_trans = np.asarray(log_trans, dtype=float)
    T, N = log_obs.shape
    seqs = np.array(list(itertools.product(range(N), repeat=T)), dtype=np.intp).reshape(-1, T)
    s = log_obs[0][seqs[:, 0]]
    for t in range(1, T):
        s = log_obs[t][seqs[:, t]] + (s + log_trans[seqs[:, t - 1], seqs[:, t]])
    best = s.max()
    tied = seqs[s == best]
    # smallest when read backwards: lexsort keys run from last to first priority
    order = np.lexsort(tuple(tied[:, t] for t in range(T)))
    return tied[order[0]].tolist(), float(best)
