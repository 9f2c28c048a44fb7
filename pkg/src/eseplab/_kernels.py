"""Compiled event loops behind the public samplers.

Every kernel simulates ``reps`` independent paths from one generator and
records the state at the sorted observation times ``obs_t``; when
``record`` is set it also writes the full event log (used with reps=1).
Status codes: 0 ok, 1 event cap exceeded.
"""

import math

import numpy as np
from numba import njit

OK = 0
EXPLODED = 1

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _grow_f(a):
    b = np.empty(max(16, 2 * a.size), dtype=a.dtype)
    b[: a.size] = a
    return b


@njit(**_JIT)
def _grow_i8(a):
    b = np.empty(max(16, 2 * a.size), dtype=np.int8)
    b[: a.size] = a
    return b


@njit(**_JIT)
def _grow_i(a):
    b = np.empty(max(16, 2 * a.size), dtype=np.int64)
    b[: a.size] = a
    return b


@njit(**_JIT)
def draw(gen, code, par):
    """One draw from a packed law (see ``laws.Law``)."""
    if code == 0:
        return gen.standard_exponential() / par[0]
    if code == 1 or code == 5:
        return par[0]
    if code == 2:
        return math.exp(par[0] + par[1] * gen.standard_normal())
    if code == 3:
        k = int(par[0])
        u = gen.random()
        acc = 0.0
        for i in range(k):
            acc += par[1 + i]
            if u < acc or i == k - 1:
                return gen.standard_exponential() / par[1 + k + i]
    # geometric on {1, 2, ...} by inversion
    p = par[0]
    if p >= 1.0:
        return 1.0
    u = gen.random()
    return math.floor(math.log1p(-u) / math.log1p(-p)) + 1.0


@njit(**_JIT)
def law_tail(code, par, x):
    if x < 0.0:
        return 1.0
    if code == 0:
        return math.exp(-par[0] * x)
    if code == 1:
        return 1.0 if x < par[0] else 0.0
    if code == 2:
        if x <= 0.0:
            return 1.0
        return 0.5 * math.erfc((math.log(x) - par[0]) / (par[1] * math.sqrt(2.0)))
    k = int(par[0])
    s = 0.0
    for i in range(k):
        s += par[1 + i] * math.exp(-par[1 + k + i] * x)
    return s


@njit(**_JIT)
def shape(code, par, x):
    if code == 0:
        return math.exp(-par[0] * x)
    if code == 1:
        return (par[0] / (par[0] + x)) ** par[1]
    return law_tail(int(par[0]), par[1:], x)


@njit(**_JIT)
def birth_death(gen, base, jump, death, pop, cap, q0, n0, horizon, obs_t, reps, record, max_events):
    """Birth-death chain covering the ESEP (pop=0, cap<0), ESEP-B (cap>=0) and SIS (pop>0).

    Up-rate ``(base + jump*q) * (pop - q)/pop`` (the factor is dropped when
    pop == 0), down-rate ``death*q``. Arrival attempts at ``q == cap`` are
    blocked. Observation columns: Q, N, D (expirations), blocked attempts.
    """
    nobs = obs_t.size
    obs = np.zeros((reps, nobs, 4), dtype=np.int64)
    ev_t = np.empty(1024 if record else 0)
    ev_k = np.empty(1024 if record else 0, dtype=np.int8)
    ev_b = np.empty(1024 if record else 0, dtype=np.int64)
    nev = 0
    status = OK
    for r in range(reps):
        t = 0.0
        q = q0
        n = n0
        d = 0
        blocked = 0
        j = 0
        count = 0
        while True:
            up = base + jump * q
            if pop > 0:
                up = up * (pop - q) / pop
            down = death * q
            tot = up + down
            if tot > 0.0:
                tn = t + gen.standard_exponential() / tot
            else:
                tn = np.inf
            while j < nobs and obs_t[j] < tn:
                obs[r, j, 0] = q
                obs[r, j, 1] = n
                obs[r, j, 2] = d
                obs[r, j, 3] = blocked
                j += 1
            if tn > horizon:
                break
            t = tn
            if gen.random() * tot < up:
                if cap >= 0 and q >= cap:
                    blocked += 1
                    kind = 2
                else:
                    q += 1
                    n += 1
                    kind = 0
            else:
                q -= 1
                d += 1
                kind = 1
            count += 1
            if count > max_events:
                status = EXPLODED
                break
            if record:
                if nev == ev_t.size:
                    ev_t = _grow_f(ev_t)
                    ev_k = _grow_i8(ev_k)
                    ev_b = _grow_i(ev_b)
                ev_t[nev] = t
                ev_k[nev] = kind
                ev_b[nev] = 1
                nev += 1
        if status != OK:
            break
    return obs, ev_t[:nev], ev_k[:nev], ev_b[:nev], status


@njit(**_JIT)
def _kernel_sum(base, excess0, scode, spar, ht, hm, h, s):
    lam = base + excess0 * shape(scode, spar, s)
    for i in range(h):
        lam += hm[i] * shape(scode, spar, s - ht[i])
    return lam


@njit(**_JIT)
def hawkes(gen, base, excess0, scode, spar, mcode, mpar, horizon, obs_t, reps, record, max_events):
    """Ogata thinning with the current intensity as the bound.

    The exponential shape (code 0) keeps a single decaying excess; other
    shapes sum over the stored history. Observation columns: intensity, N.
    Returns the number of proposals so callers can report acceptance rates.
    """
    nobs = obs_t.size
    obs = np.zeros((reps, nobs, 2))
    ev_t = np.empty(1024 if record else 0)
    ev_m = np.empty(1024 if record else 0)
    nev = 0
    proposals = 0
    status = OK
    ht = np.empty(64)
    hm = np.empty(64)
    for r in range(reps):
        t = 0.0
        n = 0
        h = 0
        x = excess0
        lam_bar = base + x
        j = 0
        count = 0
        while True:
            if lam_bar > 0.0:
                tn = t + gen.standard_exponential() / lam_bar
            else:
                tn = np.inf
            while j < nobs and obs_t[j] < tn:
                if scode == 0:
                    obs[r, j, 0] = base + x * math.exp(-spar[0] * (obs_t[j] - t))
                else:
                    obs[r, j, 0] = _kernel_sum(base, excess0, scode, spar, ht, hm, h, obs_t[j])
                obs[r, j, 1] = n
                j += 1
            if tn > horizon:
                break
            if scode == 0:
                x = x * math.exp(-spar[0] * (tn - t))
                lam_new = base + x
            else:
                lam_new = _kernel_sum(base, excess0, scode, spar, ht, hm, h, tn)
            t = tn
            proposals += 1
            if gen.random() * lam_bar <= lam_new:
                m = draw(gen, mcode, mpar)
                n += 1
                if scode == 0:
                    x += m
                else:
                    if h == ht.size:
                        ht = _grow_f(ht)
                        hm = _grow_f(hm)
                    ht[h] = t
                    hm[h] = m
                    h += 1
                lam_bar = lam_new + m
                count += 1
                if count > max_events:
                    status = EXPLODED
                    break
                if record:
                    if nev == ev_t.size:
                        ev_t = _grow_f(ev_t)
                        ev_m = _grow_f(ev_m)
                    ev_t[nev] = t
                    ev_m[nev] = m
                    nev += 1
            else:
                lam_bar = lam_new
        if status != OK:
            break
    return obs, ev_t[:nev], ev_m[:nev], proposals, status


@njit(**_JIT)
def _heap_less(ht, hs, a, b):
    return ht[a] < ht[b] or (ht[a] == ht[b] and hs[a] < hs[b])


@njit(**_JIT)
def _heap_push(ht, hs, hn, tv, sv):
    if hn == ht.size:
        ht = _grow_f(ht)
        hs = _grow_i(hs)
    ht[hn] = tv
    hs[hn] = sv
    i = hn
    while i > 0:
        parent = (i - 1) // 2
        if _heap_less(ht, hs, i, parent):
            ht[i], ht[parent] = ht[parent], ht[i]
            hs[i], hs[parent] = hs[parent], hs[i]
            i = parent
        else:
            break
    return ht, hs, hn + 1


@njit(**_JIT)
def _heap_pop(ht, hs, hn):
    hn -= 1
    ht[0] = ht[hn]
    hs[0] = hs[hn]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        best = i
        if left < hn and _heap_less(ht, hs, left, best):
            best = left
        if right < hn and _heap_less(ht, hs, right, best):
            best = right
        if best == i:
            break
        ht[i], ht[best] = ht[best], ht[i]
        hs[i], hs[best] = hs[best], hs[i]
        i = best
    return hn


@njit(**_JIT)
def ngesep(gen, base, jump, scale, bcode, bpar, dcode, dpar, q0, n0, horizon, obs_t, reps, record, max_events):
    """Batch arrivals at rate ``base + (jump/scale) Q``; each individual expires after its own duration.

    Expiration times sit in a binary heap keyed by (time, insertion order),
    so simultaneous expirations leave in insertion order. Observation
    columns: Q, N.
    """
    nobs = obs_t.size
    obs = np.zeros((reps, nobs, 2), dtype=np.int64)
    ev_t = np.empty(1024 if record else 0)
    ev_k = np.empty(1024 if record else 0, dtype=np.int8)
    ev_b = np.empty(1024 if record else 0, dtype=np.int64)
    nev = 0
    status = OK
    ht = np.empty(64)
    hs = np.empty(64, dtype=np.int64)
    step = jump / scale
    for r in range(reps):
        hn = 0
        seq = 0
        for _ in range(q0):
            ht, hs, hn = _heap_push(ht, hs, hn, draw(gen, dcode, dpar), seq)
            seq += 1
        t = 0.0
        q = q0
        n = n0
        j = 0
        count = 0
        while True:
            eta = base + step * q
            ta = t + gen.standard_exponential() / eta if eta > 0.0 else np.inf
            te = ht[0] if hn > 0 else np.inf
            tn = te if te <= ta else ta
            while j < nobs and obs_t[j] < tn:
                obs[r, j, 0] = q
                obs[r, j, 1] = n
                j += 1
            if tn > horizon:
                break
            t = tn
            if te <= ta:
                hn = _heap_pop(ht, hs, hn)
                q -= 1
                kind = 1
                b = 1
            else:
                b = int(draw(gen, bcode, bpar))
                for _ in range(b):
                    ht, hs, hn = _heap_push(ht, hs, hn, t + draw(gen, dcode, dpar), seq)
                    seq += 1
                q += b
                n += 1
                kind = 0
            count += 1
            if count > max_events:
                status = EXPLODED
                break
            if record:
                if nev == ev_t.size:
                    ev_t = _grow_f(ev_t)
                    ev_k = _grow_i8(ev_k)
                    ev_b = _grow_i(ev_b)
                ev_t[nev] = t
                ev_k[nev] = kind
                ev_b[nev] = b
                nev += 1
        if status != OK:
            break
    return obs, ev_t[:nev], ev_k[:nev], ev_b[:nev], status


@njit(**_JIT)
def hesep(gen, base, jump, decay, service, nu0, q0, n0, horizon, obs_t, reps, record, max_events):
    """Thinning for the hybrid process with bound ``nu + service*Q`` at the last event.

    Between events nu decays toward ``base`` at rate ``decay``; an
    expiration removes ``(nu - base)/Q`` from nu. Observation columns:
    nu, Q, N.
    """
    nobs = obs_t.size
    obs = np.zeros((reps, nobs, 3))
    ev_t = np.empty(1024 if record else 0)
    ev_k = np.empty(1024 if record else 0, dtype=np.int8)
    nev = 0
    proposals = 0
    status = OK
    for r in range(reps):
        t = 0.0
        nu = nu0
        q = q0
        n = n0
        j = 0
        count = 0
        while True:
            bound = nu + service * q
            tn = t + gen.standard_exponential() / bound if bound > 0.0 else np.inf
            while j < nobs and obs_t[j] < tn:
                obs[r, j, 0] = base + (nu - base) * math.exp(-decay * (obs_t[j] - t))
                obs[r, j, 1] = q
                obs[r, j, 2] = n
                j += 1
            if tn > horizon:
                break
            nu = base + (nu - base) * math.exp(-decay * (tn - t))
            t = tn
            proposals += 1
            u = gen.random() * bound
            exp_rate = service * q
            if u < exp_rate:
                nu -= (nu - base) / q
                q -= 1
                kind = 1
            elif u < exp_rate + nu:
                nu += jump
                q += 1
                n += 1
                kind = 0
            else:
                continue
            count += 1
            if count > max_events:
                status = EXPLODED
                break
            if record:
                if nev == ev_t.size:
                    ev_t = _grow_f(ev_t)
                    ev_k = _grow_i8(ev_k)
                ev_t[nev] = t
                ev_k[nev] = kind
                nev += 1
        if status != OK:
            break
    return obs, ev_t[:nev], ev_k[:nev], proposals, status


@njit(**_JIT)
def clusters(gen, hawkes_model, alpha, beta, reps, record, max_size):
    """Immigration-birth clusters grown from one seed arrival at time 0.

    ESEP: each member lives Exp(beta) and bears children at Poisson rate
    alpha while alive. Hawkes: each member bears Poisson(alpha/beta)
    children at Exp(beta) offsets. Returns totals, generation counts and,
    when recording, the (generation, time) pairs of the last cluster.
    """
    totals = np.zeros(reps, dtype=np.int64)
    depth = np.zeros(reps, dtype=np.int64)
    qt = np.empty(64)
    qg = np.empty(64, dtype=np.int64)
    status = OK
    tail = 0
    mean_children = alpha / beta
    for r in range(reps):
        qt[0] = 0.0
        qg[0] = 1
        head = 0
        tail = 1
        while head < tail:
            a = qt[head]
            g = qg[head]
            head += 1
            if hawkes_model:
                acc = gen.standard_exponential()
                while acc < mean_children:
                    if tail == qt.size:
                        qt = _grow_f(qt)
                        qg = _grow_i(qg)
                    qt[tail] = a + gen.standard_exponential() / beta
                    qg[tail] = g + 1
                    tail += 1
                    acc += gen.standard_exponential()
            else:
                life = gen.standard_exponential() / beta
                s = gen.standard_exponential() / alpha if alpha > 0.0 else np.inf
                while s < life:
                    if tail == qt.size:
                        qt = _grow_f(qt)
                        qg = _grow_i(qg)
                    qt[tail] = a + s
                    qg[tail] = g + 1
                    tail += 1
                    s += gen.standard_exponential() / alpha
            if tail > max_size:
                status = EXPLODED
                break
        totals[r] = tail
        # breadth-first order puts the deepest member last
        depth[r] = qg[tail - 1]
        if status != OK:
            break
    if record:
        return totals, depth, qt[:tail].copy(), qg[:tail].copy(), status
    return totals, depth, qt[:0].copy(), qg[:0].copy(), status
