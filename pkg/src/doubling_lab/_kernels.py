"""Hot loops for the cell grid, jitted with numba when available.

The pure-Python definitions are the reference implementation; numba
compiles the same code.  Cell binning avoids trig in the pair loop:

* the first coordinate bin comes from a binary search of y^2 + z^2 in the
  precomputed sin^2 edge table;
* the two angular bins come from binary searches against precomputed edge
  direction tables, using the sign of 2x2 determinants (``b cos - a sin``)
  as the "angle >= edge" predicate on a half-circle.

A quaternion (w, x, y, z) is binned by the chart coordinates of whichever
of its two lifts has the (w, x)-plane angle in [0, pi); crossing to the
antipodal lift shifts the (y, z)-plane angle by pi.  The (w, x) bin is
lift-independent modulo pi, so only the last coordinate needs the parity.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _search_leq(table, value):
    """Largest index k with table[k] <= value; table increasing, table[0] <= value."""
    lo = 0
    hi = table.shape[0] - 1
    if table[hi] <= value:
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if table[mid] <= value:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _line_bin(a, b, cos_edges, sin_edges):
    """Bin of the direction angle of (a, b) modulo pi, for edges k*delta in [0, pi]."""
    if b < 0.0 or (b == 0.0 and a < 0.0):
        a = -a
        b = -b
    if b == 0.0:
        return 0
    lo = 0
    hi = cos_edges.shape[0] - 1
    # predicate "angle >= edge k" is the sign of b cos(edge) - a sin(edge);
    # true at k = 0 (b > 0), false at the pi edge (-b < 0)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if b * cos_edges[mid] - a * sin_edges[mid] >= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def _cell_index(w, x, y, z, sin2_eta_edges, cos_b1, sin_b1, cos_b2, sin_b2, n_eta, n_xi1, n_xi2):
    """Flat cell index of the rotation with lift (w, x, y, z); any lift sign works."""
    yz = y * y + z * z
    if yz > 1.0:
        yz = 1.0
    i_eta = _search_leq(sin2_eta_edges, yz)
    if i_eta >= n_eta:
        i_eta = n_eta - 1

    i1 = _line_bin(w, x, cos_b1, sin_b1)
    if i1 >= n_xi1:
        i1 = n_xi1 - 1

    # chart lift has the (w, x) angle in [0, pi); otherwise use the antipode,
    # which shifts the (y, z) angle by pi
    if x < 0.0 or (x == 0.0 and w < 0.0):
        yy = -y
        zz = -z
    else:
        yy = y
        zz = z
    half = n_xi2 // 2
    i2 = _line_bin(yy, zz, cos_b2, sin_b2)
    if i2 >= half:
        i2 = half - 1
    if zz < 0.0 or (zz == 0.0 and yy < 0.0):
        i2 += half

    return (i_eta * n_xi1 + i1) * n_xi2 + i2


@njit(cache=True)
def pair_visit(aq, bq, sin2_eta_edges, cos_b1, sin_b1, cos_b2, sin_b2, n_eta, n_xi1, n_xi2, visited):
    """Mark the cell of every pairwise product a*b in the byte array ``visited``."""
    na = aq.shape[0]
    nb = bq.shape[0]
    for i in range(na):
        aw = aq[i, 0]
        ax = aq[i, 1]
        ay = aq[i, 2]
        az = aq[i, 3]
        for j in range(nb):
            bw = bq[j, 0]
            bx = bq[j, 1]
            by = bq[j, 2]
            bz = bq[j, 3]
            w = aw * bw - ax * bx - ay * by - az * bz
            x = aw * bx + ax * bw + ay * bz - az * by
            y = aw * by - ax * bz + ay * bw + az * bx
            z = aw * bz + ax * by - ay * bx + az * bw
            idx = _cell_index(
                w, x, y, z, sin2_eta_edges, cos_b1, sin_b1, cos_b2, sin_b2, n_eta, n_xi1, n_xi2
            )
            visited[idx] = 1


@njit(cache=True)
def pair_visit_orbits(
    rep_a,
    ptr_a,
    off_a,
    rep_b,
    ptr_b,
    off_b,
    sin2_eta_edges,
    cos_b1,
    sin_b1,
    cos_b2,
    sin_b2,
    n_eta,
    n_xi1,
    n_xi2,
    visited,
):
    """Orbit-factored pair visiting for grids with d_xi1 == d_xi2 (n_xi2 = 2 n_xi1).

    Left multiplication by the circle element e_t = (cos t, sin t, 0, 0)
    shifts chart coordinates by (+t, +t) and right multiplication by
    (+t, -t); with equal angular bin widths both actions shift bin indices
    by exact integers.  Cells are grouped into circle orbits with integer
    offsets from an orbit representative, so one product and one locate per
    representative pair places every member pair by index arithmetic:

        (e_s a_rep) (b_rep e_m) = e_s (a_rep b_rep) e_m
                                -> bins of a_rep b_rep shifted by (s+m, s-m),

    with a half-turn added to the last coordinate per wrap of the first
    (the antipodal identification).
    """
    half = n_xi2 // 2
    nn = n_xi1 * n_xi2
    noa = rep_a.shape[0]
    nob = rep_b.shape[0]
    for ia in range(noa):
        aw = rep_a[ia, 0]
        ax = rep_a[ia, 1]
        ay = rep_a[ia, 2]
        az = rep_a[ia, 3]
        for ib in range(nob):
            bw = rep_b[ib, 0]
            bx = rep_b[ib, 1]
            by = rep_b[ib, 2]
            bz = rep_b[ib, 3]
            w = aw * bw - ax * bx - ay * by - az * bz
            x = aw * bx + ax * bw + ay * bz - az * by
            y = aw * by - ax * bz + ay * bw + az * bx
            z = aw * bz + ax * by - ay * bx + az * bw
            flat = _cell_index(
                w, x, y, z, sin2_eta_edges, cos_b1, sin_b1, cos_b2, sin_b2, n_eta, n_xi1, n_xi2
            )
            e_p = flat // nn
            rem = flat - e_p * nn
            b1 = rem // n_xi2
            b2 = rem - b1 * n_xi2
            row = e_p * n_xi1
            for t in range(ptr_a[ia], ptr_a[ia + 1]):
                s = off_a[t]
                b1s = b1 + s
                b2s = b2 + s
                for u in range(ptr_b[ib], ptr_b[ib + 1]):
                    m = off_b[u]
                    big = b1s + m
                    if big >= 2 * n_xi1:
                        k1 = big - 2 * n_xi1  # two wraps shift the fiber by a full turn
                        v = b2s - m
                    elif big >= n_xi1:
                        k1 = big - n_xi1
                        v = b2s - m + half
                    else:
                        k1 = big
                        v = b2s - m
                    if v < 0:
                        v += n_xi2
                    elif v >= n_xi2:
                        v -= n_xi2
                    visited[(row + k1) * n_xi2 + v] = 1


@njit(cache=True)
def dilate(
    u_indices,
    centers,
    d_eta,
    d_xi1,
    d_xi2,
    n_eta,
    n_xi1,
    n_xi2,
    s_bound,
    chord,
    cos_threshold,
    marked,
):
    """Mark every cell whose center lies within the dilation reach of a source.

    ``s_bound`` is the 3-sphere geodesic reach (half the rotation-metric
    dilation radius) and ``chord`` an upper bound on the corresponding
    4-space chord.  For each source cell and each reachable grid row a
    window certified to contain every reachable center is enumerated; each
    candidate is confirmed exactly via ``|<q_k, q_m>| >= cos_threshold``.
    The angular half-widths per row come from sin(angle) <= chord / (planar
    radius of the row), valid while the chord is below both planar radii;
    beyond that the chart direction is unconstrained and the row's whole
    circle is scanned.  Returns the number of marked cells, stopping early
    once the grid saturates.
    """
    pad = 1e-9
    n_cells = n_eta * n_xi1 * n_xi2
    count = 0
    # per-(eta, xi1)-row fill counts let saturated rows be skipped wholesale
    row_fill = np.zeros(n_eta * n_xi1, dtype=np.int64)
    for t in range(marked.shape[0]):
        if marked[t] != 0:
            count += 1
            row_fill[t // n_xi2] += 1
    for t in range(u_indices.shape[0]):
        if count >= n_cells:
            break
        m = u_indices[t]
        i_eta = m // (n_xi1 * n_xi2)
        rem = m - i_eta * (n_xi1 * n_xi2)
        i1 = rem // n_xi2
        i2 = rem - i1 * n_xi2
        eta_p = (i_eta + 0.5) * d_eta
        xi1_p = (i1 + 0.5) * d_xi1
        xi2_p = (i2 + 0.5) * d_xi2
        cos_p = np.cos(eta_p)
        sin_p = np.sin(eta_p)

        k_eta_lo = int(np.floor((eta_p - s_bound - pad) / d_eta - 0.5))
        k_eta_hi = int(np.floor((eta_p + s_bound + pad) / d_eta + 0.5))
        if k_eta_lo < 0:
            k_eta_lo = 0
        if k_eta_hi > n_eta - 1:
            k_eta_hi = n_eta - 1

        c2 = chord * chord
        for k_eta in range(k_eta_lo, k_eta_hi + 1):
            eta_k = (k_eta + 0.5) * d_eta
            cos_k = np.cos(eta_k)
            sin_k = np.sin(eta_k)
            row = k_eta * n_xi1

            # planar-angle windows, valid while the chord stays below both
            # planar radii (otherwise the direction is unconstrained)
            if c2 + pad < cos_p * cos_p + cos_k * cos_k and chord < cos_k:
                hw1 = np.arcsin(chord / cos_k) + pad
                k1_lo = int(np.floor((xi1_p - hw1) / d_xi1 - 0.5))
                k1_hi = int(np.floor((xi1_p + hw1) / d_xi1 + 0.5))
                xi1_windowed = True
            else:
                k1_lo = 0
                k1_hi = n_xi1 - 1
                xi1_windowed = False

            if xi1_windowed and c2 + pad < sin_p * sin_p + sin_k * sin_k and chord < sin_k:
                hw2 = np.arcsin(chord / sin_k) + pad
                xi2_full = False
            else:
                hw2 = 0.0
                xi2_full = True

            for k1_raw in range(k1_lo, k1_hi + 1):
                k1 = k1_raw % n_xi1
                if row_fill[row + k1] >= n_xi2:
                    continue
                # crossing the pi boundary in the first angle swaps to the
                # antipodal lift, shifting the second angle by pi
                shifted = (k1_raw < 0) or (k1_raw >= n_xi1)
                base = (row + k1) * n_xi2
                if xi2_full:
                    for k2 in range(n_xi2):
                        k = base + k2
                        if marked[k] == 0:
                            d = (
                                centers[k, 0] * centers[m, 0]
                                + centers[k, 1] * centers[m, 1]
                                + centers[k, 2] * centers[m, 2]
                                + centers[k, 3] * centers[m, 3]
                            )
                            if abs(d) >= cos_threshold:
                                marked[k] = 1
                                count += 1
                                row_fill[row + k1] += 1
                else:
                    center2 = xi2_p + np.pi if shifted else xi2_p
                    k2_lo = int(np.floor((center2 - hw2) / d_xi2 - 0.5))
                    k2_hi = int(np.floor((center2 + hw2) / d_xi2 + 0.5))
                    for k2_raw in range(k2_lo, k2_hi + 1):
                        k2 = k2_raw % n_xi2
                        k = base + k2
                        if marked[k] == 0:
                            d = (
                                centers[k, 0] * centers[m, 0]
                                + centers[k, 1] * centers[m, 1]
                                + centers[k, 2] * centers[m, 2]
                                + centers[k, 3] * centers[m, 3]
                            )
                            if abs(d) >= cos_threshold:
                                marked[k] = 1
                                count += 1
                                row_fill[row + k1] += 1
    return count
