"""Pure-Python selection and drawing kernels.

This is the fallback for environments without the compiled extension, and
the semantic reference for it. Arithmetic is written loop by loop in the
same order as the C code (left-to-right accumulation, libm pow) so the two
backends agree bit for bit, not just approximately.

All kernels take a probability vector (indexable of float64), an optional
allowed-token mask (indexable of 0/1, or None for all tokens), and never
renormalize unless their contract says so. Random draws happen outside:
callers pass a uniform ``u`` in.
"""

from __future__ import annotations


def topk_all(probs, k: int) -> list[tuple[float, int]]:
    """Top ``k`` of all tokens as (probability, token id), sorted by
    probability descending, ties by id ascending."""
    n = len(probs)
    ids = sorted(range(n), key=lambda i: (-float(probs[i]), i))
    return [(float(probs[i]), i) for i in ids[:k]]


def topk_masked(probs, mask, k: int) -> list[tuple[float, int]]:
    """Like :func:`topk_all` restricted to ids where ``mask`` is nonzero."""
    ids = [i for i in range(len(probs)) if mask[i]]
    ids.sort(key=lambda i: (-float(probs[i]), i))
    return [(float(probs[i]), i) for i in ids[:k]]


def nucleus_pick(probs, mask, inv_tau: float, top_p: float, u: float) -> int:
    """Temperature-then-top-p draw; returns a token id or -1 on zero mass.

    Steps: raise each allowed probability to ``inv_tau``, renormalize, sort
    descending (ties by id), keep the minimal prefix whose cumulative mass
    reaches ``top_p``, renormalize the kept set, then invert the CDF at
    ``u``.
    """
    if mask is None:
        ids = list(range(len(probs)))
    else:
        ids = [i for i in range(len(probs)) if mask[i]]
    w = []
    total = 0.0
    for i in ids:
        x = float(probs[i]) ** inv_tau
        w.append(x)
        total += x
    if total <= 0.0:
        return -1
    for j in range(len(w)):
        w[j] = w[j] / total
    order = sorted(range(len(ids)), key=lambda j: (-w[j], ids[j]))
    kept = []
    cum = 0.0
    for j in order:
        if cum < top_p:
            kept.append(j)
            cum += w[j]
        else:
            break
    total2 = 0.0
    for j in kept:
        total2 += w[j]
    if total2 <= 0.0:
        return -1
    c = 0.0
    for j in kept:
        c += w[j] / total2
        if u < c:
            return ids[j]
    return ids[kept[-1]]


def topk_pick(probs, mask, k: int, inv_tau: float, u: float) -> int:
    """Top-k-then-temperature draw; returns a token id or -1 on zero mass.

    The cut keeps the ``k`` largest raw probabilities (ties by id), then
    temperature is applied to the kept set, renormalized, and the CDF is
    inverted at ``u``.
    """
    if mask is None:
        ids = list(range(len(probs)))
    else:
        ids = [i for i in range(len(probs)) if mask[i]]
    ids.sort(key=lambda i: (-float(probs[i]), i))
    kept = ids[: min(k, len(ids))]
    w = []
    total = 0.0
    for i in kept:
        x = float(probs[i]) ** inv_tau
        w.append(x)
        total += x
    if total <= 0.0:
        return -1
    c = 0.0
    for j in range(len(kept)):
        c += w[j] / total
        if u < c:
            return kept[j]
    return kept[-1]
