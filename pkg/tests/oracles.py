"""Independent reference computations used only by the tests."""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eig


def cheb(n):
    """Chebyshev points x_j = cos(pi j/n) and the differentiation matrix."""
    x = np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    Dm = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    Dm -= np.diag(Dm.sum(axis=1))
    return x, Dm


def collocation_eigenvalues(u, u2, alpha, n=160, L=4.0):
    """Rayleigh eigenvalues on [0, inf) by collocation with the map y = L(1+x)/(1-x)."""
    x, Dx = cheb(n)
    xi = x[1:-1]
    y = L * (1 + xi) / (1 - xi)
    dxdy = (1 - xi) ** 2 / (2 * L)
    d2xdy2 = -(1 - xi) ** 3 / (2 * L * L)
    D1 = Dx[1:-1, 1:-1]
    D2 = (Dx @ Dx)[1:-1, 1:-1]
    Dy2 = np.diag(dxdy ** 2) @ D2 + np.diag(d2xdy2) @ D1
    lap = Dy2 - alpha ** 2 * np.eye(xi.size)
    A = np.diag(u(y)) @ lap - np.diag(u2(y))
    w = eig(A, lap, right=False)
    return w[np.isfinite(w)]


def jet_eigenvalue(alpha, guess, n=160, L=4.0):
    w = collocation_eigenvalues(lambda y: y * np.exp(-y), lambda y: (y - 2) * np.exp(-y),
                                alpha, n, L)
    return w[np.argmin(np.abs(w - guess))]


def dispersion_ivp(u, u2, alpha, c, y_max=30.0, rtol=1e-12, atol=1e-14):
    """psi_-(0) by scipy's integrator on the real axis (Im c > 0 only)."""
    def f(y, s):
        q = alpha ** 2 + u2(y) / (u(y) - c)
        return [s[1], q * s[0]]
    e = np.exp(-alpha * y_max)
    sol = solve_ivp(f, (y_max, 0.0), [e + 0j, -alpha * e + 0j], method="DOP853",
                    rtol=rtol, atol=atol)
    return sol.y[0, -1]
