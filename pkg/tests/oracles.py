"""Reference values computed independently of the package, with mpmath at 30 digits."""

import mpmath as mp

mp.mp.dps = 30


def theta_brute(a, b, z, tau, N=40):
    """sum_{|n| <= N} exp(i pi (n+a)^2 tau + (n+a)(z + 2 pi i b)) by direct summation."""
    a, b, z, tau = mp.mpf(a), mp.mpf(b), mp.mpc(z), mp.mpc(tau)
    return complex(mp.fsum(mp.exp(1j * mp.pi * (n + a) ** 2 * tau + (n + a) * (z + 2j * mp.pi * b))
                           for n in range(-N, N + 1)))


def eta_ref(tau):
    q = mp.exp(2j * mp.pi * tau)
    return complex(q ** (mp.mpf(1) / 24) * mp.qp(q))


def eisenstein4_ref(tau):
    """Standard-normalised E4 from Jacobi thetas: (th2^8 + th3^8 + th4^8)/2."""
    q = mp.exp(1j * mp.pi * tau)
    return complex((mp.jtheta(2, 0, q) ** 8 + mp.jtheta(3, 0, q) ** 8 + mp.jtheta(4, 0, q) ** 8) / 2)


def prime_form_ref(z, tau):
    return -1j * theta_brute(0.5, 0.5, z, tau) / eta_ref(tau) ** 3


def twisted_eisenstein_ref(nmax, a, b, tau):
    """E_1..E_nmax from z P1(z) = 1 - sum E_n z^n, P1 = theta_ab(z)/(theta_ab(0) K(z))."""
    t0 = theta_brute(a, b, 0, tau)
    et3 = eta_ref(tau) ** 3
    r, N = 0.5, 48
    zs = [r * complex(mp.expjpi(2 * mp.mpf(k) / N)) for k in range(N)]
    fz = [z * theta_brute(a, b, z, tau) / (t0 * (-1j / et3) * theta_brute(0.5, 0.5, z, tau)) for z in zs]
    # Cauchy integral for the Taylor coefficients of z P1(z)
    return [-sum(f * z ** (-n) for f, z in zip(fz, zs)) / N for n in range(1, nmax + 1)]


def delta_coeffs_convolution(order):
    """q prod (1 - q^n)^24 by repeated integer polynomial multiplication."""
    poly = [1] + [0] * order
    for n in range(1, order + 1):
        for _ in range(24):
            for k in range(order, n - 1, -1):
                poly[k] -= poly[k - n]
    return [0] + poly[:order]
