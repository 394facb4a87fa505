"""Pure-numpy Viterbi forward/traceback kernel.

Fallback used when the compiled extension (``dualink._viterbi_c``) is not
available. Same contract, roughly an order of magnitude slower: the add-
compare-select recursion is vectorized across trellis states but still steps
through coded symbols one at a time.
"""

import numpy as np

BACKEND = "python"


def viterbi_rate2(branch_llr, pred_state, pred_sign, input_shift):
    """Maximum-likelihood path through a rate-1/2 trellis.

    branch_llr  : float64 [T, 2], LLRs of the two coded bits per step
                  (positive = coded bit 0 = antipodal symbol +1).
    pred_state  : int32 [n_states, 2], the two predecessor states of each state.
    pred_sign   : float64 [n_states, 2, 2], expected antipodal symbols on the
                  transition pred_state[d, j] -> d.
    input_shift : bit position of the decoded input bit within a state index.

    Returns uint8 [T] decoded input bits (tail included), assuming the path
    starts and ends in state 0.
    """
    branch_llr = np.ascontiguousarray(branch_llr, dtype=np.float64)
    T = branch_llr.shape[0]
    n_states = pred_state.shape[0]

    pm = np.full(n_states, -1e300)
    pm[0] = 0.0
    choices = np.empty((T, n_states), dtype=np.uint8)
    sign0 = pred_sign[:, :, 0]
    sign1 = pred_sign[:, :, 1]
    for t in range(T):
        cand = pm[pred_state] + branch_llr[t, 0] * sign0 + branch_llr[t, 1] * sign1
        choice = cand[:, 1] > cand[:, 0]
        pm = np.where(choice, cand[:, 1], cand[:, 0])
        choices[t] = choice

    bits = np.empty(T, dtype=np.uint8)
    state = 0  # zero-tail termination
    for t in range(T - 1, -1, -1):
        bits[t] = state >> input_shift
        state = pred_state[state, choices[t, state]]
    return bits
