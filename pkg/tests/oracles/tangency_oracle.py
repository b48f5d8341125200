"""Closed-form tangency oracle for quadratic folds of the affine model.

For a fold over W^s_loc(P) with flat disks, the image of S_t along a word w
of length k sits at central height lam^k p(t) - K_w over P, where
K_w = mu * sum over B letters at position j of lam^(k-1-j). Everything below
is computed from that formula alone, by enumerating words.
"""

import numpy as np


def vertex(skew: float) -> float:
    """Parameter of the maximum of (1 - r^2)(1 + skew r), r = 2t - 1."""
    r = 0.0 if skew == 0 else (np.sqrt(4 + 12 * skew * skew) - 2) / (6 * skew)
    return 0.5 * (r + 1)


def peak(apex: float, skew: float) -> float:
    r = 2 * vertex(skew) - 1
    return apex * (1 - r * r) * (1 + skew * r)


def admissible_words(lam: float, mu: float, apex: float, skew: float, kmax: int = 20) -> list:
    """For k = 0..kmax: (words, K) of all words whose every prefix image keeps
    its peak strictly between the two reference heights 0 and mu/(lam-1)."""
    q = mu / (lam - 1)
    p = peak(apex, skew)
    words = np.zeros((1, 0), dtype=np.int8)
    K = np.zeros(1)
    out = [(words, K)]
    for k in range(1, kmax + 1):
        words = np.concatenate([np.hstack([words, np.zeros((len(words), 1), np.int8)]),
                                np.hstack([words, np.ones((len(words), 1), np.int8)])])
        K = np.concatenate([lam * K, lam * K + mu])
        h = lam ** k * p - K
        keep = (h > 0) & (h < q)
        words, K = words[keep], K[keep]
        out.append((words, K))
    return out


def greedy_word(words: np.ndarray) -> str:
    """Lexicographically smallest word (A before B)."""
    order = np.lexsort(words.T[::-1])
    return "".join("AB"[b] for b in words[order[0]])


def window(lam: float, k: int, K: float, apex: float, skew: float) -> tuple:
    """{t in [0,1] : lam^k p(t) >= K} as an interval."""
    if K == 0:
        return 0.0, 1.0
    # lam^k apex (1 - r^2)(1 + skew r) - K = 0 as a cubic in r
    a = lam ** k * apex
    roots = np.roots([-a * skew, -a, a * skew, a - K])
    r = np.sort(roots[np.abs(roots.imag) < 1e-12].real)
    r = r[(r > -1) & (r < 1)]
    return 0.5 * (r[0] + 1), 0.5 * (r[-1] + 1)
