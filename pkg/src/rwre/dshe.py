"""Discrete stochastic heat equation for the tilted density.

Row r of the tilted density lives on y = 2j - r.  The martingale-difference
field at row r sits on the sites of row r + 1:

    v(r, y) = W(r+1, y) - rho W(r, y-1) - (1 - rho) W(r, y+1)
            = (1 - 2w_{r,y+1})(1 - rho) W(r, y+1) + (2w_{r,y-1} - 1) rho W(r, y-1).

Test functions are evaluated at u_{r,y} = N^{-1/2}(y - N^{-1/4} r), and
grad_N phi(u) = (1 - rho) phi(u - N^{-1/2}) - rho phi(u + N^{-1/2}).
"""

import math

import numpy as np

from .env import rho, seed_u64
from .qkernel import _rows, row_weights
from .testfn import GAUSS_HALF, ST_HALF


class DiscreteSheRun:
    """One environment's tilted density up to row T + 1 with its weights.

    Parameters
    ----------
    env : Environment
    N : int
        Scaling parameter.
    T : int, optional
        Last row at which martingale increments are summed (default N).
    """

    def __init__(self, env, N, T=None):
        self.env = env
        self.N = int(N)
        self.T = int(N if T is None else T)
        self.rho = rho(N)
        self.lam = float(N) ** -0.25
        self.sigma2 = env.spec.sigma2
        s = env.spec
        args = (seed_u64(env.seed), s.code, float(s.param), float(s.shift))
        self._tab = _rows(*args, self.T + 1, 2.0 * self.rho, 2.0 * (1.0 - self.rho))
        self._w = [row_weights(*args, r) for r in range(self.T + 1)]

    # -- basic accessors -------------------------------------------------

    def W(self, r):
        return self._tab[r, :r + 1]

    def weights(self, r):
        """w(r, 2j - r) for j = 0..r."""
        return self._w[r]

    def y(self, r):
        return 2 * np.arange(r + 1) - r

    def u(self, r, y):
        return (np.asarray(y, dtype=float) - self.lam * r) / math.sqrt(self.N)

    def grad(self, phi, u):
        h = 1.0 / math.sqrt(self.N)
        return (1.0 - self.rho) * phi(u - h) - self.rho * phi(u + h)

    def _rows_to(self, t):
        R = int(round(t * self.N))
        if R > self.T:
            raise ValueError(f"t={t} beyond the simulated horizon T={self.T}")
        return range(R + 1)

    # -- martingale-difference field ------------------------------------

    def v_field(self, r):
        """(y, v by the heat operator, v by the weight stencil) on row r + 1 sites."""
        W = self.W(r)
        Wn = self._tab[r + 1, :r + 2]
        w = self.weights(r)
        lower = np.concatenate(([0.0], W))   # W(r, y - 1)
        upper = np.concatenate((W, [0.0]))   # W(r, y + 1)
        wl = np.concatenate(([0.5], w))
        wu = np.concatenate((w, [0.5]))
        heat = Wn - self.rho * lower - (1.0 - self.rho) * upper
        stencil = (1.0 - 2.0 * wu) * (1.0 - self.rho) * upper + (2.0 * wl - 1.0) * self.rho * lower
        return self.y(r + 1), heat, stencil

    def _increment_sum_form(self, r, phi):
        y, heat, _ = self.v_field(r)
        return float(np.dot(phi(self.u(r, y)), heat))

    def _increment_grad_form(self, r, phi):
        y = self.y(r)
        eta = 1.0 - 2.0 * self.weights(r)
        return float(np.dot(self.grad(phi, self.u(r, y)) * self.W(r), eta))

    def m_field(self, t, phi):
        """M_N(t, phi) by the site-sum form and by the gradient form."""
        a = math.fsum(self._increment_sum_form(r, phi) for r in self._rows_to(t))
        b = math.fsum(self._increment_grad_form(r, phi) for r in self._rows_to(t))
        return a, b

    def quadratic_variations(self, t, phi):
        """(optional QV, predictable QV) of M_N(phi) up to time t."""
        opt = math.fsum(self._increment_grad_form(r, phi) ** 2 for r in self._rows_to(t))
        pred = 4.0 * self.sigma2 * math.fsum(
            float(np.sum((self.grad(phi, self.u(r, self.y(r))) * self.W(r)) ** 2))
            for r in self._rows_to(t))
        return opt, pred

    def qmf(self, t, phi):
        """Q_N(t, phi) = (4 sigma^2 / sqrt N) sum_{r <= Nt} sum_y phi(u) W(r, y)^2."""
        return 4.0 * self.sigma2 / math.sqrt(self.N) * math.fsum(
            float(np.dot(phi(self.u(r, self.y(r))), self.W(r) ** 2)) for r in self._rows_to(t))

    def _error_row(self, r, phi):
        u = self.u(r, self.y(r))
        br = self.grad(phi, u) ** 2 - (2.0 * self.rho - 1.0) ** 2 * phi(u) ** 2
        return 4.0 * self.sigma2 * float(np.dot(br, self.W(r) ** 2))

    def error_term(self, t, phi):
        """E_N(t, phi) = 4 sigma^2 sum sum [(grad phi)^2 - (2 rho - 1)^2 phi^2] W^2."""
        return math.fsum(self._error_row(r, phi) for r in self._rows_to(t))

    def mq_decomposition(self, t, phi):
        """(<M>_t, E_N(t, phi) + (2 rho - 1)^2 sqrt(N) Q_N(t, phi^2))."""
        _, pred = self.quadratic_variations(t, phi)
        sq = lambda x: phi(x) ** 2
        rhs = self.error_term(t, phi) + (2.0 * self.rho - 1.0) ** 2 * math.sqrt(self.N) * self.qmf(t, sq)
        return pred, rhs

    def error_bound_rows(self, phi):
        """Per-row |dE_N| against the pathwise bound and its literal stronger variant.

        Returns arrays (|dE|, bound, literal) where
        bound = 8 sigma^2 N^{-3/4} |phi|_{C1}^2 sum W^2 1{|u| <= A + 1} and
        literal = 8 N^{-1/4} sigma^2 |phi|_{C1}^2 dQ_N(1_{[-A-1, A+1]}).
        """
        c1 = phi.c1_norm()
        A = phi.support_radius()
        if not math.isfinite(c1):
            raise ValueError("the bound needs a C^1 test function")
        absd, bound, literal = [], [], []
        for r in range(self.T + 1):
            u = self.u(r, self.y(r))
            win = np.abs(u) <= A + 1.0
            s = float(np.sum(self.W(r)[win] ** 2))
            absd.append(abs(self._error_row(r, phi)))
            bound.append(8.0 * self.sigma2 * self.N ** -0.75 * c1 ** 2 * s)
            dq = 4.0 * self.sigma2 / math.sqrt(self.N) * s
            literal.append(8.0 * self.N ** -0.25 * self.sigma2 * c1 ** 2 * dq)
        return np.array(absd), np.array(bound), np.array(literal)

    # -- fields used by the QMF key estimate ------------------------------

    def pairing(self, r, phi):
        """U_N(r / N, phi) at lattice row r."""
        return float(np.dot(self.W(r), phi(self.u(r, self.y(r)))))

    def key_estimate(self, t, a, eps, coef=None):
        """D = Q_N(t, xi_eps^a) - coef N^{-1} sum_{r <= Nt} U_N(r/N, xi_{eps sqrt2}^a)^2.

        ``coef`` defaults to 8 sigma^2 / (1 - 4 sigma^2).
        """
        from .testfn import TestFunction
        if coef is None:
            coef = 8.0 * self.sigma2 / (1.0 - 4.0 * self.sigma2)
        psi = TestFunction.gaussian(a, eps)
        chi = TestFunction.gaussian(a, eps * math.sqrt(2.0))
        s = math.fsum(self.pairing(r, chi) ** 2 for r in self._rows_to(t)) / self.N
        return self.qmf(t, psi) - coef * s

    # -- noise fields -------------------------------------------------------

    def white_noise_pairing(self, phi):
        """N^{-3/4} sum_{r <= Nt} sum_{y = r mod 2} phi(u) (2w - 1), for each row r.

        Returned as the per-row increments; the running sum gives the field.
        """
        out = np.empty(self.T + 1)
        for r in range(self.T + 1):
            y0, y1 = _window_sites(self, r, phi)
            ys = np.arange(y0, y1 + 1, 2)
            w = self.env.grid(r, r + 1, y0, y1 + 1)[0, ::2]
            out[r] = self.N ** -0.75 * float(np.dot(phi(self.u(r, ys)), 2.0 * w - 1.0))
        return out

    def noise_fields(self, t, phi, st_phi):
        """(Xi_N(st_phi), W_N(t, phi), exact <M, W>_t, realized sum dM dW)."""
        R = int(round(t * self.N))
        dW = self.white_noise_pairing(phi)[:R + 1]
        dM = np.array([self._increment_grad_form(r, phi) for r in range(R + 1)])
        cross = -4.0 * self.sigma2 * self.N ** -0.75 * math.fsum(
            float(np.dot(phi(self.u(r, self.y(r))) * self.grad(phi, self.u(r, self.y(r))), self.W(r)))
            for r in range(R + 1))
        return (self.noise_field(st_phi), math.fsum(dW), cross, math.fsum(dM * dW))

    def noise_field(self, st_phi, rows=None):
        """Xi_N(st_phi) = (2 N^{3/2} sigma^2)^{-1/2} sum (2w - 1) st_phi(r/N, u) over y = r mod 2.

        The factor (2w - 1) (rather than w - 1/2) gives the white-noise normalization.
        """
        if self.sigma2 == 0.0:
            return 0.0
        total = 0.0
        rows = range(self.T + 1) if rows is None else rows
        half = ST_HALF * st_phi.sx
        for r in rows:
            c = self.lam * r + math.sqrt(self.N) * st_phi.x0
            y0 = _parity_floor(c - half * math.sqrt(self.N), r)
            y1 = _parity_floor(c + half * math.sqrt(self.N), r)
            ys = np.arange(y0, y1 + 1, 2)
            w = self.env.grid(r, r + 1, y0, y1 + 1)[0, ::2]
            total += float(np.dot(st_phi(r / self.N, self.u(r, ys)), 2.0 * w - 1.0))
        return total / math.sqrt(2.0 * self.N ** 1.5 * self.sigma2)

    def records(self, t, phi):
        """Per-row table (r, M, optQV, predQV, Q, E, Wfield, crossQV) for CSV export."""
        R = int(round(t * self.N))
        dW = self.white_noise_pairing(phi)
        rows = []
        M = opt = pred = Q = E = Wf = cross = 0.0
        for r in range(R + 1):
            u = self.u(r, self.y(r))
            g = self.grad(phi, u)
            dM = self._increment_grad_form(r, phi)
            M += dM
            opt += dM * dM
            pred += 4.0 * self.sigma2 * float(np.sum((g * self.W(r)) ** 2))
            Q += 4.0 * self.sigma2 / math.sqrt(self.N) * float(np.dot(phi(u), self.W(r) ** 2))
            E += self._error_row(r, phi)
            Wf += dW[r]
            cross += -4.0 * self.sigma2 * self.N ** -0.75 * float(np.dot(phi(u) * g, self.W(r)))
            rows.append((r, M, opt, pred, Q, E, Wf, cross))
        return rows


def _parity_floor(x, r):
    """Largest integer <= x with the parity of r."""
    y = math.floor(x)
    return y if (y - r) % 2 == 0 else y - 1


def _window_sites(run, r, phi):
    lo, hi = _support(phi)
    c = run.lam * r
    s = math.sqrt(run.N)
    lo = max(lo, -1e6)
    hi = min(hi, 1e6)
    y0 = _parity_floor(c + lo * s, r)
    y1 = _parity_floor(c + hi * s, r) + 2
    return y0, y1


def _support(phi):
    if phi.kind == "gaussian":
        return phi.a - GAUSS_HALF * phi.eps, phi.a + GAUSS_HALF * phi.eps
    if phi.kind == "indicator":
        return phi.lo, phi.hi
    return phi.a - phi.eps, phi.a + phi.eps
