"""Replica-parallel Monte Carlo kernels.

Replica i always uses the environment seeded by ``replica_seed(base, i)`` and
writes only to row i of its output, so results do not depend on the number
of threads.  Reductions happen afterwards in numpy, in replica order.

Tilted rows are stored compactly (y = 2j - r) and only the active index
range [lo, hi] is updated; entries below ``TINY`` are flushed to zero to keep
the arithmetic out of the subnormal range.  Exact identity checks use the
unflushed DP in ``qkernel`` instead.  Flushed mass is at most
TINY per site and row, far below any statistical resolution.
"""

import math

import numpy as np
from numba import njit, prange

from . import rng
from .testfn import ST_HALF, phi_eval, phi_window

TINY = 1e-30


@njit(cache=True, inline="always")
def _j_range(r, lam, sqrtN, umin, umax, lo, hi):
    """Compact indices j in [lo, hi] whose u = (2j - r - lam r)/sqrtN lies in [umin, umax]."""
    a = math.ceil((lam * r + umin * sqrtN + r) / 2.0)
    b = math.floor((lam * r + umax * sqrtN + r) / 2.0)
    return max(lo, a), min(hi, b)


@njit(cache=True, inline="always")
def _tilted_step(cur, nxt, lo, hi, rk, kind, par, shift, r, up, down):
    nxt[lo] = 0.0
    for j in range(lo, hi + 1):
        a = cur[j]
        w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - r))
        nxt[j] += down * (1.0 - w) * a
        nxt[j + 1] = up * w * a
    hi += 1
    while lo < hi and nxt[lo] < TINY:
        nxt[lo] = 0.0
        lo += 1
    while hi > lo and nxt[hi] < TINY:
        nxt[hi] = 0.0
        hi -= 1
    return lo, hi


@njit(cache=True, inline="always")
def _pair(W, r, lo, hi, lam, sqrtN, code, p):
    umin, umax = phi_window(code, p)
    a, b = _j_range(r, lam, sqrtN, umin, umax, lo, hi)
    s = 0.0
    for j in range(a, b + 1):
        s += W[j] * phi_eval(code, p, (2 * j - r - lam * r) / sqrtN)
    return s


@njit(cache=True, inline="always")
def _pair_sq(W, r, lo, hi, lam, sqrtN, code, p):
    umin, umax = phi_window(code, p)
    a, b = _j_range(r, lam, sqrtN, umin, umax, lo, hi)
    s = 0.0
    for j in range(a, b + 1):
        s += W[j] * W[j] * phi_eval(code, p, (2 * j - r - lam * r) / sqrtN)
    return s


@njit(cache=True, parallel=True)
def mc_pairings(seeds, kind, par, shift, N, rec_rows, codes, params):
    """U_N(r/N, phi) at each recorded row for every replica: out[rep, rec, phi]."""
    n = len(seeds)
    T = rec_rows[-1]
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    out = np.zeros((n, len(rec_rows), len(codes)))
    for i in prange(n):
        cur = np.zeros(T + 2)
        nxt = np.zeros(T + 2)
        cur[0] = 1.0
        lo = 0
        hi = 0
        skey = rng.seed_key(seeds[i])
        k = 0
        for r in range(T + 1):
            while k < len(rec_rows) and rec_rows[k] == r:
                for f in range(len(codes)):
                    out[i, k, f] = _pair(cur, r, lo, hi, lam, sqrtN, codes[f], params[f])
                k += 1
            if r == T:
                break
            lo, hi = _tilted_step(cur, nxt, lo, hi, rng.row_key(skey, r), kind, par, shift,
                                  r, 2.0 * rho, 2.0 * (1.0 - rho))
            cur, nxt = nxt, cur
    return out


@njit(cache=True, parallel=True)
def mc_qmf(seeds, kind, par, shift, sigma2, N, rec_rows, qcodes, qparams, scodes, sparams):
    """Running Q_N(t, psi) and S_N(t, chi) = N^{-1} sum_{r <= Nt} U_N(r/N, chi)^2.

    Returns (Q[rep, rec, psi], S[rep, rec, chi]); row r contributes to every
    record at rows >= r.
    """
    n = len(seeds)
    T = rec_rows[-1]
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    cq = 4.0 * sigma2 / sqrtN
    Q = np.zeros((n, len(rec_rows), len(qcodes)))
    S = np.zeros((n, len(rec_rows), len(scodes)))
    for i in prange(n):
        cur = np.zeros(T + 2)
        nxt = np.zeros(T + 2)
        cur[0] = 1.0
        lo = 0
        hi = 0
        qacc = np.zeros(len(qcodes))
        sacc = np.zeros(len(scodes))
        skey = rng.seed_key(seeds[i])
        k = 0
        for r in range(T + 1):
            for f in range(len(qcodes)):
                qacc[f] += cq * _pair_sq(cur, r, lo, hi, lam, sqrtN, qcodes[f], qparams[f])
            for f in range(len(scodes)):
                u = _pair(cur, r, lo, hi, lam, sqrtN, scodes[f], sparams[f])
                sacc[f] += u * u / N
            while k < len(rec_rows) and rec_rows[k] == r:
                Q[i, k, :] = qacc
                S[i, k, :] = sacc
                k += 1
            if r == T:
                break
            lo, hi = _tilted_step(cur, nxt, lo, hi, rng.row_key(skey, r), kind, par, shift,
                                  r, 2.0 * rho, 2.0 * (1.0 - rho))
            cur, nxt = nxt, cur
    return Q, S


@njit(cache=True, parallel=True)
def mc_noise(seeds, kind, par, shift, sigma2, N, T, code, p):
    """Per replica: M(T), W(T), exact <M, W>_T, sum dM dW, [M]_T, <M>_T.

    M is the martingale pairing in gradient form and W the white-noise pairing
    N^{-3/4} sum phi(u)(2w - 1) over sites y = r mod 2.
    """
    n = len(seeds)
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    h = 1.0 / sqrtN
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    scale_w = N ** -0.75
    out = np.zeros((n, 6))
    umin, umax = phi_window(code, p)
    for i in prange(n):
        cur = np.zeros(T + 2)
        nxt = np.zeros(T + 2)
        cur[0] = 1.0
        lo = 0
        hi = 0
        skey = rng.seed_key(seeds[i])
        M = 0.0
        Wf = 0.0
        cross = 0.0
        real = 0.0
        opt = 0.0
        pred = 0.0
        for r in range(T + 1):
            rk = rng.row_key(skey, r)
            # martingale increment over the active range widened by one lattice step
            a, b = _j_range(r, lam, sqrtN, umin - h, umax + h, lo, hi)
            dM = 0.0
            pv = 0.0
            for j in range(a, b + 1):
                u = (2 * j - r - lam * r) / sqrtN
                g = (1.0 - rho) * phi_eval(code, p, u - h) - rho * phi_eval(code, p, u + h)
                w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - r))
                gw = g * cur[j]
                dM += gw * (1.0 - 2.0 * w)
                pv += gw * gw
                cross += phi_eval(code, p, u) * gw
            # white-noise increment over every parity site in the window
            a, b = _j_range(r, lam, sqrtN, umin, umax, -1 << 40, 1 << 40)
            dW = 0.0
            for j in range(a, b + 1):
                w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - r))
                dW += phi_eval(code, p, (2 * j - r - lam * r) / sqrtN) * (2.0 * w - 1.0)
            dW *= scale_w
            M += dM
            Wf += dW
            real += dM * dW
            opt += dM * dM
            pred += 4.0 * sigma2 * pv
            if r == T:
                break
            lo, hi = _tilted_step(cur, nxt, lo, hi, rk, kind, par, shift,
                                  r, 2.0 * rho, 2.0 * (1.0 - rho))
            cur, nxt = nxt, cur
        out[i, 0] = M
        out[i, 1] = Wf
        out[i, 2] = -4.0 * sigma2 * scale_w * cross
        out[i, 3] = real
        out[i, 4] = opt
        out[i, 5] = pred
    return out


@njit(cache=True, parallel=True)
def mc_annealed_moment(seeds, k, N, T, code, p, clog, kind, par, shift):
    """k-point annealed estimator of E[U_N(T/N, phi)^k], one sample per replica.

    Walkers move under the skewed law (cluster weight min(1, w + shift) shared
    by the walkers on a site); every cluster of size n >= 2 multiplies the
    weight by exp(clog[n, b]) with b its number of up-moves.
    """
    n = len(seeds)
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    out = np.zeros(n)
    salt = np.uint64(0x5851F42D4C957F2D)
    for i in prange(n):
        pos = np.zeros(k, dtype=np.int64)
        newpos = np.zeros(k, dtype=np.int64)
        done = np.zeros(k, dtype=np.bool_)
        skey = rng.seed_key(seeds[i])
        ckey = rng.seed_key(seeds[i] ^ salt)
        logw = 0.0
        for r in range(T):
            rk = rng.row_key(skey, r)
            ck = rng.row_key(ckey, r)
            for a in range(k):
                done[a] = False
            for a in range(k):
                if done[a]:
                    continue
                w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, pos[a]))
                size = 0
                ups = 0
                for b in range(a, k):
                    if not done[b] and pos[b] == pos[a]:
                        done[b] = True
                        size += 1
                        if rng.site_uniform(ck, b) < w:
                            newpos[b] = pos[b] + 1
                            ups += 1
                        else:
                            newpos[b] = pos[b] - 1
                if size >= 2:
                    logw += clog[size, ups]
            for a in range(k):
                pos[a] = newpos[a]
        val = math.exp(logw)
        for a in range(k):
            val *= phi_eval(code, p, (pos[a] - lam * T) / sqrtN)
        out[i] = val
    return out


@njit(cache=True)
def pair_moment_rows(N, T, sigma2, code, p, half_width):
    """Exact E[U_N(T/N, phi)^2] by the two-walker recursion on a window.

    Two walkers on distinct sites move independently with tilted probabilities
    (rho, 1 - rho); on a shared site the products pick up the weight variance:
    +4 rho^2 sigma^2 (both up), +4 (1-rho)^2 sigma^2 (both down),
    -4 rho (1-rho) sigma^2 (split).  The window keeps compact indices within
    ``half_width`` of the tilted mean; returns (moment, mass outside the window).
    """
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    q = 1.0 - rho
    size = 2 * half_width + 1
    cur = np.zeros((size, size))
    nxt = np.zeros((size, size))
    # slot s of row r holds compact index j = s + off, off = floor(rho r) - half_width
    off = -half_width
    cur[half_width, half_width] = 1.0
    lost = 0.0
    for r in range(T):
        noff = int(math.floor(rho * (r + 1))) - half_width
        shift = noff - off
        nxt[:, :] = 0.0
        for s1 in range(size):
            j1 = s1 + off
            if j1 < 0 or j1 > r:
                continue
            for s2 in range(size):
                v = cur[s1, s2]
                if v == 0.0:
                    continue
                j2 = s2 + off
                if j1 == j2:
                    uu = rho * rho + 4.0 * rho * rho * sigma2
                    dd = q * q + 4.0 * q * q * sigma2
                    ud = rho * q - 4.0 * rho * q * sigma2
                else:
                    uu = rho * rho
                    dd = q * q
                    ud = rho * q
                for d1 in range(2):
                    for d2 in range(2):
                        t1 = s1 + d1 - shift
                        t2 = s2 + d2 - shift
                        if d1 == 1 and d2 == 1:
                            f = uu
                        elif d1 == 0 and d2 == 0:
                            f = dd
                        else:
                            f = ud
                        if 0 <= t1 < size and 0 <= t2 < size:
                            nxt[t1, t2] += f * v
                        else:
                            lost += f * v
        cur, nxt = nxt, cur
        off = noff
    total = 0.0
    for s1 in range(size):
        j1 = s1 + off
        if j1 < 0 or j1 > T:
            continue
        f1 = phi_eval(code, p, (2 * j1 - T - lam * T) / sqrtN)
        for s2 in range(size):
            j2 = s2 + off
            if j2 < 0 or j2 > T:
                continue
            total += cur[s1, s2] * f1 * phi_eval(code, p, (2 * j2 - T - lam * T) / sqrtN)
    return total, lost


@njit(cache=True)
def first_moment_exact(N, T, code, p):
    """E[U_N(T/N, phi)]: the tilted binomial law paired with phi."""
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    s = 0.0
    lr = math.log(rho)
    lq = math.log(1.0 - rho)
    for j in range(T + 1):
        lp = math.lgamma(T + 1) - math.lgamma(j + 1) - math.lgamma(T - j + 1) + j * lr + (T - j) * lq
        s += math.exp(lp) * phi_eval(code, p, (2 * j - T - lam * T) / sqrtN)
    return s


@njit(cache=True, parallel=True)
def mc_chaos_terms(seeds, kind, par, shift, N, T, K, target, scale, code, p):
    """Order-0..K chaos terms and the full value, per replica: out[rep, K + 2].

    With ``target >= 0`` the terms are evaluated at compact index ``target`` of
    row T and multiplied by ``scale``; otherwise they are paired with phi.
    The tilted order-k arrays obey
    A_k(r+1, y) = rho [A_k + w_hat A_{k-1}](r, y-1) + (1-rho) [A_k - w_hat A_{k-1}](r, y+1).
    """
    n = len(seeds)
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    rho = 1.0 / (1.0 + math.exp(-2.0 * lam))
    out = np.zeros((n, K + 2))
    for i in prange(n):
        A = np.zeros((K + 2, T + 2))
        B = np.zeros((K + 2, T + 2))
        A[0, 0] = 1.0
        A[K + 1, 0] = 1.0  # full tilted density
        skey = rng.seed_key(seeds[i])
        for r in range(T):
            rk = rng.row_key(skey, r)
            for k in range(K + 2):
                for j in range(r + 2):
                    B[k, j] = 0.0
            for j in range(r + 1):
                w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - r))
                wh = 2.0 * w - 1.0
                for k in range(K + 1):
                    a = A[k, j]
                    if k > 0:
                        c = wh * A[k - 1, j]
                        B[k, j + 1] += rho * (a + c)
                        B[k, j] += (1.0 - rho) * (a - c)
                    else:
                        B[k, j + 1] += rho * a
                        B[k, j] += (1.0 - rho) * a
                a = A[K + 1, j]
                B[K + 1, j + 1] += 2.0 * rho * w * a
                B[K + 1, j] += 2.0 * (1.0 - rho) * (1.0 - w) * a
            A, B = B, A
        for k in range(K + 2):
            if target >= 0:
                out[i, k] = scale * A[k, target]
            else:
                s = 0.0
                for j in range(T + 1):
                    s += A[k, j] * phi_eval(code, p, (2 * j - T - lam * T) / sqrtN)
                out[i, k] = s
    return out


@njit(cache=True, parallel=True)
def mc_extremes(seeds, kind, par, shift, T, tilt, log_k, samples, centering, quarter):
    """Recentered quenched maxima quarter * m - centering, drawn by inverse transform.

    Per environment the DP runs with tilt parameter ``tilt`` (up-probability
    (1 + tanh(tilt))/2 in the tilted weights), the upper tails
    P(R(T) >= m) are rebuilt from it, and P(max <= m) = (1 - P(R >= m + 2))^k.
    Returns (samples[rep, s], conditional mean[rep], conditional variance[rep]).
    """
    n = len(seeds)
    th = math.tanh(tilt)
    up = 1.0 + th
    down = 1.0 - th
    lc = math.log(math.cosh(tilt))
    salt = np.uint64(0x2545F4914F6CDD1D)
    out = np.zeros((n, samples))
    mean = np.zeros(n)
    var = np.zeros(n)
    for i in prange(n):
        cur = np.zeros(T + 2)
        nxt = np.zeros(T + 2)
        cur[0] = 1.0
        lo = 0
        hi = 0
        skey = rng.seed_key(seeds[i])
        for r in range(T):
            lo, hi = _tilted_step(cur, nxt, lo, hi, rng.row_key(skey, r), kind, par, shift,
                                  r, up, down)
            cur, nxt = nxt, cur
        # log P(R >= y_j) for compact j, from suffix sums S_j = sum_{l >= j} W_l e^{-2 tilt (l - j)}
        logtail = np.full(T + 2, -np.inf)
        acc = 0.0
        e2 = math.exp(-2.0 * tilt)
        for j in range(hi, -1, -1):
            acc = cur[j] + e2 * acc if j >= lo else e2 * acc
            if acc > 0.0:
                logtail[j] = math.log(acc) - tilt * (2 * j - T) + T * lc
            else:
                logtail[j] = -np.inf
        # log P(max <= y_j) = k log(1 - P(R >= y_{j+1}))
        logF = np.zeros(T + 1)
        for j in range(T + 1):
            lt = logtail[j + 1] if j + 1 <= T else -np.inf
            if lt == -np.inf:
                logF[j] = 0.0
            elif lt >= 0.0:
                logF[j] = -np.inf
            else:
                logF[j] = math.exp(log_k) * math.log1p(-math.exp(lt))
        # conditional moments of the recentered max
        m1 = 0.0
        m2 = 0.0
        prev = 0.0
        for j in range(T + 1):
            F = math.exp(logF[j])
            pj = F - prev
            prev = F
            if pj > 0.0:
                x = quarter * (2 * j - T) - centering
                m1 += pj * x
                m2 += pj * x * x
        mean[i] = m1
        var[i] = m2 - m1 * m1
        ck = rng.row_key(rng.seed_key(seeds[i] ^ salt), 0)
        for s in range(samples):
            lu = math.log(rng.site_uniform(ck, s))
            # smallest j with logF[j] >= log U (logF nondecreasing)
            a = 0
            b = T
            while a < b:
                m = (a + b) // 2
                if logF[m] >= lu:
                    b = m
                else:
                    a = m + 1
            out[i, s] = quarter * (2 * a - T) - centering
    return out, mean, var


@njit(cache=True, parallel=True)
def mc_xi(seeds, kind, par, shift, sigma2, N, stp):
    """Xi_N(stp) alone for every replica (no density recursion needed)."""
    n = len(seeds)
    lam = N ** -0.25
    sqrtN = math.sqrt(N)
    su0 = stp[1] - ST_HALF * stp[3]
    su1 = stp[1] + ST_HALF * stp[3]
    st0 = max(0, int(math.floor((stp[0] - ST_HALF * stp[2]) * N)))
    st1 = int(math.ceil((stp[0] + ST_HALF * stp[2]) * N))
    norm = 1.0 / math.sqrt(2.0 * N ** 1.5 * sigma2) if sigma2 > 0 else 0.0
    out = np.zeros(n)
    for i in prange(n):
        skey = rng.seed_key(seeds[i])
        xi = 0.0
        for r in range(st0, st1 + 1):
            rk = rng.row_key(skey, r)
            a, b = _j_range(r, lam, sqrtN, su0, su1, -1 << 40, 1 << 40)
            z = (r / N - stp[0]) / stp[2]
            ft = math.exp(-0.5 * z * z)
            row = 0.0
            for j in range(a, b + 1):
                w = rng.weight_from_uniform(kind, par, shift, rng.site_uniform(rk, 2 * j - r))
                z = ((2 * j - r - lam * r) / sqrtN - stp[1]) / stp[3]
                row += (2.0 * w - 1.0) * math.exp(-0.5 * z * z)
            xi += ft * row
        out[i] = xi * norm
    return out
