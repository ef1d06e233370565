"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``.

Same signatures, same accumulation order, identical floating point results.
"""
import numpy as np


def enumerate_chunk(start, count, radices, probs_flat, prob_off, tables_flat,
                    table_off, term_coords, term_strides, out_vals, out_probs):
    flat = np.arange(start, start + count, dtype=np.int64)
    digits = np.unravel_index(flat, tuple(int(k) for k in radices))
    pr = np.ones(count)
    for c in range(len(radices)):
        pr *= probs_flat[prob_off[c] + digits[c]]
    out_probs[:count] = pr
    out_vals[:count] = _sum_terms(digits, tables_flat, table_off,
                                  term_coords, term_strides, count)


def eval_sampled(idx, tables_flat, table_off, term_coords, term_strides, out_vals):
    cols = [idx[:, c] for c in range(idx.shape[1])]
    out_vals[:] = _sum_terms(cols, tables_flat, table_off, term_coords,
                             term_strides, idx.shape[0])


def _sum_terms(digits, tables_flat, table_off, term_coords, term_strides, count):
    s = np.zeros(count)
    m = term_coords.shape[1]
    for t in range(len(table_off)):
        pos = np.full(count, table_off[t], dtype=np.int64)
        for j in range(m):
            pos += term_strides[t, j] * digits[term_coords[t, j]]
        s += tables_flat[pos]
    return s
